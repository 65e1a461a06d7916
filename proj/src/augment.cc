// src/augment.cc

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

#include "ssk/augment.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ssk/error.h"
#include "ssk/fft.h"

namespace ssk {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::ambient: return "ambient";
    case NoiseKind::music: return "music";
    case NoiseKind::babble: return "babble";
  }
  return "?";
}

std::string to_string(AugmentChoice choice) {
  switch (choice) {
    case AugmentChoice::additive_noise: return "additive_noise";
    case AugmentChoice::music: return "music";
    case AugmentChoice::babble: return "babble";
    case AugmentChoice::reverb: return "reverb";
    case AugmentChoice::noise_plus_reverb: return "noise_plus_reverb";
  }
  return "?";
}

AugmentChoice parse_augment_choice(const std::string& name) {
  for (auto c : {AugmentChoice::additive_noise, AugmentChoice::music, AugmentChoice::babble,
                 AugmentChoice::reverb, AugmentChoice::noise_plus_reverb})
    if (to_string(c) == name) return c;
  throw ConfigError("unknown augmentation choice '" + name + "'");
}

void Rir::validate() const {
  if (taps.empty()) throw DegenerateInputError("empty room impulse response");
  double energy = 0.0;
  for (double t : taps) {
    if (!std::isfinite(t)) throw DegenerateInputError("room impulse response has a non-finite tap");
    energy += t * t;
  }
  if (!std::isfinite(energy) || energy == 0.0)
    throw DegenerateInputError("room impulse response has zero or infinite energy");
  for (std::size_t i = 1; i < taps.size(); ++i)
    if (std::abs(taps[i]) > std::abs(taps[0]))
      throw DegenerateInputError("room impulse response: direct path is not the largest tap");
  if (!(rt60_s > 0)) throw DegenerateInputError("room impulse response: rt60 must be positive");
}

void AugmentationPolicy::validate() const {
  if (choices.empty()) throw ConfigError("augmentation policy has no choices");
  if (!(snr_low_db <= snr_high_db)) throw ConfigError("augmentation SNR range is inverted");
}

std::vector<std::size_t> AssetBank::of_kind(NoiseKind kind) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < noises.size(); ++i)
    if (noises[i].kind == kind) idx.push_back(i);
  return idx;
}

double signal_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  if (clean.size() != noise.size() || clean.sample_rate != noise.sample_rate)
    throw ContractError("mix_at_snr: clean and noise differ in length or sample rate");
  const double p_clean = signal_power(clean.samples);
  const double p_noise = signal_power(noise.samples);
  if (!(p_clean > 0.0)) throw DegenerateInputError("mix_at_snr: clean signal has zero power");
  if (!(p_noise > 0.0)) throw DegenerateInputError("mix_at_snr: noise has zero power");
  const double gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform out = clean;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += gain * noise.samples[i];
  return out;
}

Waveform apply_rir(const Waveform& clean, const Rir& rir) {
  rir.validate();
  clean.validate();
  const std::size_t n = clean.size();
  std::vector<double> wet;
  if (rir.taps.size() <= 32) {
    wet.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const std::size_t kmax = std::min(rir.taps.size(), i + 1);
      for (std::size_t k = 0; k < kmax; ++k) acc += rir.taps[k] * clean.samples[i - k];
      wet[i] = acc;
    }
  } else {
    wet = fft_convolve(clean.samples, rir.taps);
    wet.resize(n);
  }
  double peak_in = 0.0, peak_out = 0.0;
  for (double v : clean.samples) peak_in = std::max(peak_in, std::abs(v));
  for (double v : wet) peak_out = std::max(peak_out, std::abs(v));
  if (peak_out > 0.0) {
    const double g = peak_in / peak_out;
    for (double& v : wet) v *= g;
  }
  return Waveform(std::move(wet), clean.sample_rate);
}

Rir synth_rir(double rt60_s, int sample_rate, Rng& rng) {
  if (!(rt60_s > 0)) throw ConfigError("rt60 must be positive");
  const std::size_t len = static_cast<std::size_t>(std::ceil(1.2 * rt60_s * sample_rate));
  Rir rir;
  rir.rt60_s = rt60_s;
  rir.taps.resize(std::max<std::size_t>(len, 2));
  rir.taps[0] = 1.0;
  // Amplitude decays 60 dB (a factor of 1000) over rt60.
  const double decay = 3.0 * std::log(10.0) / (rt60_s * sample_rate);
  for (std::size_t i = 1; i < rir.taps.size(); ++i)
    rir.taps[i] = 0.1 * rng.uniform(-1.0, 1.0) * std::exp(-decay * static_cast<double>(i));
  return rir;
}

namespace {

void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (double& v : x) v *= peak / m;
}

std::vector<double> ambient_noise(std::size_t n, int sample_rate, Rng& rng) {
  const double lp = rng.uniform(0.3, 0.9);
  const double hum_hz = rng.uniform(50.0, 120.0);
  const double hum = rng.uniform(0.0, 0.3);
  std::vector<double> x(n);
  double y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y = lp * y + (1.0 - lp) * rng.normal();
    x[i] = y + hum * std::sin(2.0 * std::numbers::pi * hum_hz * i / sample_rate);
  }
  normalize_peak(x, 0.5);
  return x;
}

std::vector<double> music_noise(std::size_t n, int sample_rate, Rng& rng) {
  const int tones = 3 + static_cast<int>(rng.uniform_int(4));
  std::vector<double> x(n, 0.0);
  for (int k = 0; k < tones; ++k) {
    const double f = std::exp(rng.uniform(std::log(110.0), std::log(1760.0)));
    const double vib_rate = rng.uniform(3.0, 7.0), vib_depth = rng.uniform(0.0, 0.01);
    const double am_rate = rng.uniform(0.2, 2.0), am_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(0.3, 1.0);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      const double inst = f * (1.0 + vib_depth * std::sin(2.0 * std::numbers::pi * vib_rate * t));
      phase += 2.0 * std::numbers::pi * inst / sample_rate;
      const double env = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * am_rate * t + am_phase);
      x[i] += amp * env * (std::sin(phase) + 0.5 * std::sin(2.0 * phase) + 0.25 * std::sin(3.0 * phase));
    }
  }
  normalize_peak(x, 0.5);
  return x;
}

std::vector<double> babble_noise(std::size_t n, int sample_rate, int talkers, double duration_s,
                                 Rng& rng) {
  std::vector<double> x(n, 0.0);
  for (int k = 0; k < talkers; ++k) {
    const SpeakerProfile talker = random_speaker(1000000 + k, rng);
    Rng urng(rng.next_u64());
    const Waveform w = synth_utterance(talker, duration_s, sample_rate, urng);
    for (std::size_t i = 0; i < n && i < w.size(); ++i) x[i] += w.samples[i];
  }
  normalize_peak(x, 0.5);
  return x;
}

}  // namespace

AssetBank synth_assets(std::uint64_t seed, int sample_rate, const AssetConfig& config) {
  if (config.noises_per_kind < 1 || config.n_rirs < 1 || !(config.noise_duration_s > 0) ||
      config.babble_talkers < 4 || !(config.rt60_min_s > 0 && config.rt60_min_s <= config.rt60_max_s))
    throw ConfigError("invalid asset configuration");
  AssetBank bank;
  const std::size_t n = samples_for(config.noise_duration_s, sample_rate);
  for (NoiseKind kind : {NoiseKind::ambient, NoiseKind::music, NoiseKind::babble}) {
    for (int k = 0; k < config.noises_per_kind; ++k) {
      Rng rng(derive_seed(seed, to_string(kind) + "/" + std::to_string(k)));
      NoiseAsset a;
      a.kind = kind;
      std::vector<double> x;
      switch (kind) {
        case NoiseKind::ambient: x = ambient_noise(n, sample_rate, rng); break;
        case NoiseKind::music: x = music_noise(n, sample_rate, rng); break;
        case NoiseKind::babble:
          x = babble_noise(n, sample_rate, config.babble_talkers, config.noise_duration_s, rng);
          break;
      }
      a.waveform = quantize_pcm16(Waveform(std::move(x), sample_rate));
      bank.noises.push_back(std::move(a));
    }
  }
  for (int k = 0; k < config.n_rirs; ++k) {
    Rng rng(derive_seed(seed, "rir/" + std::to_string(k)));
    const double rt60 = rng.uniform(config.rt60_min_s, config.rt60_max_s);
    bank.rirs.push_back(synth_rir(rt60, sample_rate, rng));
  }
  return bank;
}

void write_assets(const AssetBank& bank, const std::filesystem::path& dir) {
  std::error_code ec;
  for (const char* sub : {"ambient", "music", "babble", "rir"}) {
    std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create " + (dir / sub).string());
  }
  std::vector<int> counters(3, 0);
  for (const auto& a : bank.noises) {
    char name[32];
    std::snprintf(name, sizeof name, "%03d.wav", counters[static_cast<int>(a.kind)]++);
    write_wav(dir / to_string(a.kind) / name, a.waveform);
  }
  std::ofstream index(dir / "rir" / "index.tsv");
  if (!index) throw IoError("cannot write rir index in " + dir.string());
  index.precision(17);
  for (std::size_t k = 0; k < bank.rirs.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "%03zu.wav", k);
    // 16-bit storage: keep the direct path just below full scale.
    Waveform w(bank.rirs[k].taps, kSampleRate);
    for (double& v : w.samples) v *= 32767.0 / 32768.0;
    write_wav(dir / "rir" / name, w);
    index << name << '\t' << bank.rirs[k].rt60_s << '\n';
  }
}

AssetBank load_assets(const std::filesystem::path& dir) {
  AssetBank bank;
  for (NoiseKind kind : {NoiseKind::ambient, NoiseKind::music, NoiseKind::babble}) {
    const auto sub = dir / to_string(kind);
    if (!std::filesystem::is_directory(sub)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(sub))
      if (e.path().extension() == ".wav") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      NoiseAsset a;
      a.kind = kind;
      a.waveform = load_wav(f);
      if (!(signal_power(a.waveform.samples) > 0.0))
        throw DegenerateInputError(f.string() + ": noise asset has zero power");
      bank.noises.push_back(std::move(a));
    }
  }
  std::ifstream index(dir / "rir" / "index.tsv");
  std::string line;
  while (index && std::getline(index, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    Rir rir;
    ls >> name >> rir.rt60_s;
    if (!ls) throw FormatError("malformed rir index line: " + line);
    rir.taps = load_wav(dir / "rir" / name).samples;
    const double direct = rir.taps.empty() ? 0.0 : rir.taps[0];
    if (direct == 0.0) throw DegenerateInputError(name + ": zero direct path");
    for (double& v : rir.taps) v /= direct;
    rir.validate();
    bank.rirs.push_back(std::move(rir));
  }
  return bank;
}

namespace {

bool uses_reverb(AugmentChoice c) {
  return c == AugmentChoice::reverb || c == AugmentChoice::noise_plus_reverb;
}

std::optional<NoiseKind> noise_kind(AugmentChoice c) {
  switch (c) {
    case AugmentChoice::additive_noise:
    case AugmentChoice::noise_plus_reverb: return NoiseKind::ambient;
    case AugmentChoice::music: return NoiseKind::music;
    case AugmentChoice::babble: return NoiseKind::babble;
    case AugmentChoice::reverb: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

Waveform apply_policy(const Waveform& segment, const AugmentationPolicy& policy,
                      const AssetBank& assets, Rng& rng, AugmentRecord* record) {
  policy.validate();
  for (AugmentChoice c : policy.choices) {
    if (uses_reverb(c) && assets.rirs.empty())
      throw ConfigError("augmentation choice '" + to_string(c) + "' needs room impulse responses");
    if (auto kind = noise_kind(c); kind && assets.of_kind(*kind).empty())
      throw ConfigError("augmentation choice '" + to_string(c) + "' needs " + to_string(*kind) +
                        " noise assets");
  }
  AugmentRecord rec;
  rec.choice = policy.choices[rng.uniform_int(policy.choices.size())];
  Waveform out = segment;
  if (uses_reverb(rec.choice)) {
    rec.rir_index = rng.uniform_int(assets.rirs.size());
    out = apply_rir(out, assets.rirs[*rec.rir_index]);
  }
  if (auto kind = noise_kind(rec.choice)) {
    const auto pool = assets.of_kind(*kind);
    rec.noise_index = pool[rng.uniform_int(pool.size())];
    const Waveform& noise = assets.noises[*rec.noise_index].waveform;
    if (noise.sample_rate != segment.sample_rate)
      throw ConfigError("noise asset sample rate differs from the segment's");
    const std::size_t n = out.size();
    rec.noise_offset = noise.size() > n ? rng.uniform_int(noise.size() - n + 1) : rng.uniform_int(noise.size());
    Waveform excerpt(std::vector<double>(n), noise.sample_rate);
    for (std::size_t i = 0; i < n; ++i)
      excerpt.samples[i] = noise.samples[(*rec.noise_offset + i) % noise.size()];
    rec.snr_db = rng.uniform(policy.snr_low_db, policy.snr_high_db);
    out = mix_at_snr(out, excerpt, *rec.snr_db);
  }
  if (record) *record = rec;
  return out;
}

}  // namespace ssk
