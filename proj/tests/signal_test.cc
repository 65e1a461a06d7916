// tests/signal_test.cc

// Copyright 2026  ssk authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>

#include "doctest.h"
#include "ssk/error.h"
#include "ssk/fft.h"
#include "ssk/signal.h"
#include "test_util.h"

namespace ssk {
namespace {

// Frame-wise pitch by inverse-filtered autocorrelation: a 12th-order LPC
// inverse filter whitens the formants (narrow F1 ringing otherwise beats the
// true period), a 9-tap Hann smoother spreads the residual pulses, then the
// first autocorrelation peak within 85% of the maximum over lags [48, 246] is
// refined by a parabola. 64 ms frames, voiced frames only.
std::vector<double> frame_pitches(const Waveform& w) {
  const int frame = 1024, hop = 512, nfft = 2048, order = 12;
  const int min_lag = kSampleRate / 330, max_lag = kSampleRate / 65;
  RealFft fft(nfft);
  std::vector<double> buf(nfft), r(nfft), x(frame), win(frame);
  std::vector<std::complex<double>> spec(fft.bins());
  std::vector<double> out;
  for (std::size_t start = 0; start + frame <= w.size(); start += hop) {
    double mean = 0.0;
    for (int k = 0; k < frame; ++k) mean += w.samples[start + k];
    mean /= frame;
    for (int k = 0; k < frame; ++k) {
      x[k] = w.samples[start + k] - mean;
      win[k] = x[k] * (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k / (frame - 1)));
    }
    // Levinson-Durbin on the windowed frame.
    std::vector<double> ac(order + 1, 0.0), a(order + 1, 0.0), prev;
    for (int l = 0; l <= order; ++l)
      for (int k = l; k < frame; ++k) ac[l] += win[k] * win[k - l];
    if (ac[0] <= 0.0) continue;
    a[0] = 1.0;
    double err = ac[0];
    for (int i = 1; i <= order; ++i) {
      double acc = ac[i];
      for (int j = 1; j < i; ++j) acc += a[j] * ac[i - j];
      const double kk = -acc / err;
      prev = a;
      for (int j = 1; j < i; ++j) a[j] = prev[j] + kk * prev[i - j];
      a[i] = kk;
      err *= 1.0 - kk * kk;
    }
    std::vector<double> e(frame, 0.0);
    for (int k = 0; k < frame; ++k)
      for (int j = 0; j <= order && j <= k; ++j) e[k] += a[j] * x[k - j];
    std::fill(buf.begin(), buf.end(), 0.0);
    double hsum = 0.0;
    for (int j = 0; j < 9; ++j) hsum += 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * j / 8);
    for (int k = 0; k < frame; ++k)
      for (int j = 0; j < 9; ++j) {
        const int src = k + 4 - j;
        if (src >= 0 && src < frame) buf[k] += (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * j / 8)) / hsum * e[src];
      }
    fft.forward(buf.data(), spec.data());
    for (auto& c : spec) c = std::norm(c);
    fft.inverse(spec.data(), r.data());
    if (r[0] <= 0.0) continue;
    // Unbiased normalization so long lags are not penalized.
    auto rn = [&](int lag) { return r[lag] / r[0] * frame / (frame - lag); };
    double peak = 0.0;
    for (int lag = min_lag; lag <= max_lag; ++lag) peak = std::max(peak, rn(lag));
    if (peak < 0.3) continue;
    int best = min_lag;
    for (int lag = min_lag + 1; lag < max_lag; ++lag)
      if (rn(lag) >= 0.85 * peak && rn(lag) >= rn(lag - 1) && rn(lag) >= rn(lag + 1)) {
        best = lag;
        break;
      }
    const double pa = rn(best - 1), pb = rn(best), pc = rn(best + 1);
    const double shift = 0.5 * (pa - pc) / (pa - 2 * pb + pc);
    out.push_back(kSampleRate / (best + shift));
  }
  return out;
}

TEST_SUITE("signal") {

TEST_CASE("samples_for and Waveform::validate") {
  CHECK(samples_for(1.8, 16000) == 28800);
  CHECK(samples_for(4.0, 16000) == 64000);
  CHECK_NOTHROW(Waveform({0.1, -0.2}, 16000).validate());
  CHECK_THROWS_AS(Waveform({}, 16000).validate(), ContractError);
  CHECK_THROWS_AS(Waveform({0.1}, 0).validate(), ContractError);
  CHECK_THROWS_AS(Waveform({std::numeric_limits<double>::quiet_NaN()}, 16000).validate(), ContractError);
}

TEST_CASE("corpus config is validated") {
  CorpusConfig c;
  c.n_speakers = 1;
  CHECK_THROWS_AS(synth_corpus(c), ConfigError);
  c = CorpusConfig{};
  c.duration_s = 3.0;  // shorter than two 1.8 s segments
  CHECK_THROWS_AS(synth_corpus(c), ConfigError);
  c = CorpusConfig{};
  c.utts_per_speaker = 0;
  CHECK_THROWS_AS(synth_corpus(c), ConfigError);
}

TEST_CASE("synth_corpus is deterministic down to the bytes on disk") {
  CorpusConfig c{2, 2, 4.0, 7};
  test::TempDir a("corpus_a"), b("corpus_b");
  write_corpus(synth_corpus(c), a.path());
  write_corpus(synth_corpus(c), b.path());
  int files = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a.path());
    CHECK(test::slurp(entry.path()) == test::slurp(b.path() / rel));
    ++files;
  }
  CHECK(files == 2 * 2 + 2);  // wavs, manifest, speakers

  const Corpus other = synth_corpus({2, 2, 4.0, 8});
  CHECK(other.audio[0].samples != synth_corpus(c).audio[0].samples);
}

TEST_CASE("synth_corpus layout and profile invariants") {
  const Corpus c = synth_corpus({3, 2, 4.0, 11, 1.8, 500, "x"});
  REQUIRE(c.size() == 6);
  CHECK(c.manifest.entries[0].utterance_id == "x0500_u000");
  CHECK(c.manifest.entries[5].speaker_id == 502);
  CHECK(c.manifest.entries[3].path == "wav/x0501_u001.wav");
  CHECK_NOTHROW(c.manifest.validate(3.6));
  for (const auto& s : c.speakers) {
    CHECK_NOTHROW(s.validate());
    CHECK(s.f0_base >= 70.0);
    CHECK(s.f0_base <= 320.0);
  }
  for (const auto& w : c.audio) {
    CHECK(w.size() == 64000);
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 1.0);
    CHECK(peak > 0.1);
  }
  CHECK(c.manifest.find_path("wav/x0502_u000.wav") == 4);
  CHECK(c.manifest.find_path("nope") == -1);
  CHECK(c.manifest.find_id("x0501_u000") == 2);
}

TEST_CASE("per-speaker mean F0 matches the profile (autocorrelation oracle)") {
  const Corpus c = synth_corpus({64, 20, 4.0, 1});
  REQUIRE(c.size() == 1280);
  double worst = 0.0;
  for (std::size_t s = 0; s < c.speakers.size(); ++s) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t u = 0; u < 20; ++u)
      for (double f : frame_pitches(c.audio[s * 20 + u])) {
        acc += f;
        ++n;
      }
    REQUIRE(n > 0);
    const double err = std::abs(acc / static_cast<double>(n) - c.speakers[s].f0_base);
    worst = std::max(worst, err);
    CHECK_MESSAGE(err <= 2.0, "speaker ", s, " f0 ", c.speakers[s].f0_base, " measured ",
                  acc / static_cast<double>(n));
  }
  MESSAGE("worst per-speaker F0 error ", worst, " Hz");
}

TEST_CASE("wav reading and writing") {
  test::TempDir d("wav");
  test::spit(d / "one.wav", test::wav_bytes(1, 16, 16000, {32767}));
  const Waveform one = load_wav(d / "one.wav");
  REQUIRE(one.size() == 1);
  CHECK(one.samples[0] == 32767.0 / 32768.0);
  CHECK(one.sample_rate == 16000);

  test::spit(d / "stereo.wav", test::wav_bytes(2, 16, 16000, {1, 2, 3, 4}));
  CHECK_THROWS_AS(load_wav(d / "stereo.wav"), FormatError);
  test::spit(d / "wide.wav", test::wav_bytes(1, 32, 16000, {1, 2, 3, 4}));
  CHECK_THROWS_AS(load_wav(d / "wide.wav"), FormatError);
  test::spit(d / "junk.wav", "RIFF????WAVEjunk");
  CHECK_THROWS_AS(load_wav(d / "junk.wav"), FormatError);
  std::string truncated = test::wav_bytes(1, 16, 16000, {1, 2, 3, 4});
  truncated.resize(truncated.size() - 3);
  test::spit(d / "short.wav", truncated);
  CHECK_THROWS_AS(load_wav(d / "short.wav"), FormatError);
  CHECK_THROWS_AS(load_wav(d / "missing.wav"), IoError);

  // Round trip of an unquantized signal stays within one quantization step.
  Rng rng(5);
  const SpeakerProfile spk = random_speaker(0, rng);
  Waveform w = synth_utterance(spk, 1.0, kSampleRate, rng);
  for (double& v : w.samples) v *= 0.987654321;
  write_wav(d / "rt.wav", w);
  const Waveform back = load_wav(d / "rt.wav");
  REQUIRE(back.size() == w.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(back.samples[i] - w.samples[i]));
  CHECK(worst <= 1.0 / 32768.0);
  CHECK(load_wav(d / "rt.wav").samples == quantize_pcm16(w).samples);
}

TEST_CASE("manifest round trip and validation") {
  test::TempDir d("manifest");
  CorpusManifest m;
  m.entries = {{"a", 1, "wav/a.wav", 4.0}, {"b", 2, "wav/b.wav", 3.5}};
  write_manifest(m, d / "m.tsv");
  const CorpusManifest back = read_manifest(d / "m.tsv");
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[1].utterance_id == "b");
  CHECK(back.entries[1].speaker_id == 2);
  CHECK(back.entries[1].path == "wav/b.wav");
  CHECK(back.entries[1].duration_s == 3.5);
  CHECK_THROWS_AS(back.validate(3.6), ManifestError);

  test::spit(d / "dup.tsv", "a\t1\tx.wav\t4.0\na\t2\ty.wav\t4.0\n");
  CHECK_THROWS_AS(read_manifest(d / "dup.tsv"), ManifestError);
  test::spit(d / "bad.tsv", "a\t1\tx.wav\n");
  CHECK_THROWS_AS(read_manifest(d / "bad.tsv"), FormatError);
}

TEST_CASE("corpus written to disk loads back") {
  test::TempDir d("corpus_rt");
  const Corpus c = synth_corpus({2, 2, 4.0, 3});
  write_corpus(c, d.path());
  const Corpus back = load_corpus(d.path());
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(back.audio[i].samples == c.audio[i].samples);
  REQUIRE(back.speakers.size() == 2);
  CHECK(back.speakers[1].f0_base == c.speakers[1].f0_base);
}

TEST_CASE("cropping two non-overlapping segments") {
  Rng rng(3);
  // Exactly two segments long: only one placement.
  const Waveform exact(std::vector<double>(57600, 0.1), kSampleRate);
  const auto o = draw_crop_offsets(57600, 28800, rng);
  CHECK(o.first == 0);
  CHECK(o.second == 28800);
  const auto [x1, x2] = crop_two_nonoverlapping(exact, 1.8, rng);
  CHECK(x1.size() == 28800);
  CHECK(x2.size() == 28800);

  const Waveform short_one(std::vector<double>(28800, 0.1), kSampleRate);
  CHECK_THROWS_AS(crop_two_nonoverlapping(short_one, 1.8, rng), LengthError);

  // 10000 draws on a 6 s utterance.
  const std::size_t total = 96000, seg = 28800;
  std::size_t min_first = total, max_first = 0, max_second = 0, min_second = total;
  int overlaps = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto d = draw_crop_offsets(total, seg, rng);
    if (d.second < d.first + seg) ++overlaps;
    CHECK(d.second + seg <= total);
    min_first = std::min(min_first, d.first);
    max_first = std::max(max_first, d.first);
    min_second = std::min(min_second, d.second);
    max_second = std::max(max_second, d.second);
  }
  CHECK(overlaps == 0);
  CHECK(min_first < 500);
  CHECK(max_first > total - 2 * seg - 500);
  CHECK(min_second < seg + 2000);
  CHECK(max_second > total - seg - 500);

  // The crops are the samples at those offsets.
  std::vector<double> ramp(96000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 1e5;
  Rng r1(9), r2(9);
  const auto d = draw_crop_offsets(96000, seg, r1);
  const auto [a, b] = crop_two_nonoverlapping(Waveform(ramp, kSampleRate), 1.8, r2);
  CHECK(a.samples.front() == ramp[d.first]);
  CHECK(b.samples.front() == ramp[d.second]);
  CHECK(a.samples.back() == ramp[d.first + seg - 1]);
}

}  // TEST_SUITE

}  // namespace
}  // namespace ssk
