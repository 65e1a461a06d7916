// src/signal.cc

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

#include "ssk/signal.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "ssk/error.h"
#include "ssk/parallel.h"

namespace ssk {

void Waveform::validate() const {
  if (sample_rate <= 0) throw ContractError("waveform sample rate must be positive");
  if (samples.empty()) throw ContractError("waveform is empty");
  for (double s : samples)
    if (!std::isfinite(s)) throw ContractError("waveform has a non-finite sample");
}

std::size_t samples_for(double seconds, int sample_rate) {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

void SpeakerProfile::validate() const {
  if (!(f0_base >= 70.0 && f0_base <= 320.0))
    throw ConfigError("speaker " + std::to_string(speaker_id) + ": f0_base outside [70, 320] Hz");
  if (!(formant_centers[0] > 0 && formant_centers[0] < formant_centers[1] &&
        formant_centers[1] < formant_centers[2]))
    throw ConfigError("speaker " + std::to_string(speaker_id) +
                      ": formant centers must be strictly increasing");
  for (double b : formant_bandwidths)
    if (!(b > 0)) throw ConfigError("formant bandwidths must be positive");
  if (!(jitter >= 0.0 && jitter <= 0.1)) throw ConfigError("jitter outside [0, 0.1]");
}

SpeakerProfile random_speaker(int speaker_id, Rng& rng) {
  SpeakerProfile p;
  p.speaker_id = speaker_id;
  p.f0_base = std::exp(rng.uniform(std::log(80.0), std::log(280.0)));
  const double f1 = rng.uniform(300.0, 850.0);
  const double f2 = rng.uniform(std::max(f1 + 350.0, 900.0), 2300.0);
  const double f3 = rng.uniform(std::max(f2 + 350.0, 2400.0), 3500.0);
  p.formant_centers = {f1, f2, f3};
  p.formant_bandwidths = {rng.uniform(60.0, 120.0), rng.uniform(80.0, 160.0),
                          rng.uniform(120.0, 240.0)};
  p.jitter = rng.uniform(0.005, 0.03);
  return p;
}

namespace {

// Two-pole resonator with unity gain at DC.
void resonate(std::vector<double>& x, double center_hz, double bandwidth_hz, int sample_rate) {
  const double r = std::exp(-std::numbers::pi * bandwidth_hz / sample_rate);
  const double theta = 2.0 * std::numbers::pi * center_hz / sample_rate;
  const double a1 = 2.0 * r * std::cos(theta), a2 = -r * r;
  const double gain = 1.0 - a1 - a2;
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = gain * v + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace

Waveform synth_utterance(const SpeakerProfile& speaker, double duration_s, int sample_rate,
                         Rng& rng) {
  speaker.validate();
  const std::size_t n = samples_for(duration_s, sample_rate);
  if (n == 0) throw ConfigError("utterance duration rounds to zero samples");

  // Intonation: a whole number of sinusoidal cycles over the utterance, so the
  // time-averaged F0 equals f0_base.
  const double depth = rng.uniform(0.02, 0.05);
  const double cycles = 1.0 + static_cast<double>(rng.uniform_int(3));
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double tilt = rng.uniform(0.80, 0.95);
  const double syllable_rate = rng.uniform(3.0, 5.0);
  const double syllable_phase = rng.uniform(0.0, std::numbers::pi);
  const double breath = rng.uniform(0.002, 0.01);
  const double peak = rng.uniform(0.3, 0.8);

  std::vector<double> x(n, 0.0);
  const double total = static_cast<double>(n) / sample_rate;
  double t = rng.uniform(0.0, 1.0 / speaker.f0_base);
  while (t < total) {
    const std::size_t idx = static_cast<std::size_t>(std::llround(t * sample_rate));
    const double shimmer = 1.0 + 0.1 * rng.uniform(-1.0, 1.0);
    if (idx < n) x[idx] += shimmer;
    const double f0 =
        speaker.f0_base * (1.0 + depth * std::sin(2.0 * std::numbers::pi * cycles * t / total + phase));
    t += (1.0 + speaker.jitter * rng.uniform(-1.0, 1.0)) / f0;
  }

  double prev = 0.0;
  for (double& v : x) {
    v += tilt * prev;
    prev = v;
  }
  for (int k = 0; k < 3; ++k)
    resonate(x, speaker.formant_centers[k], speaker.formant_bandwidths[k], sample_rate);
  // The resonators pass DC; remove it before shaping.
  double dc = 0.0;
  for (double v : x) dc += v;
  dc /= static_cast<double>(n);

  double max_abs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::sin(std::numbers::pi * syllable_rate * i / sample_rate + syllable_phase);
    const double env = 0.3 + 0.7 * s * s;
    x[i] = (x[i] - dc) * env;
    max_abs = std::max(max_abs, std::abs(x[i]));
  }
  if (max_abs == 0.0) max_abs = 1.0;
  for (double& v : x) v = v / max_abs + breath * rng.normal();
  max_abs = 0.0;
  for (double v : x) max_abs = std::max(max_abs, std::abs(v));
  for (double& v : x) v *= peak / max_abs;
  return quantize_pcm16(Waveform(std::move(x), sample_rate));
}

// ---------------------------------------------------------------- manifest

void CorpusManifest::validate(double min_duration_s) const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.utterance_id).second)
      throw ManifestError("duplicate utterance id '" + e.utterance_id + "'");
    if (e.duration_s < min_duration_s)
      throw ManifestError("utterance '" + e.utterance_id + "' is shorter than " +
                          std::to_string(min_duration_s) + " s");
  }
}

int CorpusManifest::find_path(const std::string& path) const {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].path == path) return static_cast<int>(i);
  return -1;
}

int CorpusManifest::find_id(const std::string& utterance_id) const {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].utterance_id == utterance_id) return static_cast<int>(i);
  return -1;
}

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw IoError("cannot write " + file.string());
  for (const auto& e : manifest.entries) {
    char dur[64];
    std::snprintf(dur, sizeof dur, "%.6f", e.duration_s);
    os << e.utterance_id << '\t' << e.speaker_id << '\t' << e.path << '\t' << dur << '\n';
  }
  if (!os) throw IoError("failed writing " + file.string());
}

CorpusManifest read_manifest(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot read " + file.string());
  CorpusManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4)
      throw FormatError(file.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    ManifestEntry e;
    e.utterance_id = fields[0];
    e.path = fields[2];
    try {
      e.speaker_id = std::stoi(fields[1]);
      e.duration_s = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw FormatError(file.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------- corpus

void CorpusConfig::validate() const {
  if (n_speakers < 2) throw ConfigError("corpus needs at least 2 speakers");
  if (utts_per_speaker < 1) throw ConfigError("corpus needs at least 1 utterance per speaker");
  if (!(segment_len_s > 0)) throw ConfigError("segment length must be positive");
  if (!(duration_s >= 2.0 * segment_len_s))
    throw ConfigError("utterance duration must be at least twice the segment length");
}

Corpus synth_corpus(const CorpusConfig& config) {
  config.validate();
  Corpus corpus;
  corpus.manifest.sample_rate = kSampleRate;
  for (int s = 0; s < config.n_speakers; ++s) {
    const int id = config.first_speaker_id + s;
    Rng rng(derive_seed(config.seed, "speaker/" + std::to_string(id)));
    corpus.speakers.push_back(random_speaker(id, rng));
  }
  for (int s = 0; s < config.n_speakers; ++s)
    for (int u = 0; u < config.utts_per_speaker; ++u) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s%04d_u%03d", config.id_prefix.c_str(),
                    corpus.speakers[static_cast<std::size_t>(s)].speaker_id, u);
      ManifestEntry e;
      e.utterance_id = buf;
      e.speaker_id = corpus.speakers[static_cast<std::size_t>(s)].speaker_id;
      e.path = "wav/" + e.utterance_id + ".wav";
      corpus.manifest.entries.push_back(e);
    }
  const std::size_t total = corpus.manifest.entries.size();
  corpus.audio.resize(total);
  parallel_for(total, [&](std::size_t i) {
    const auto& e = corpus.manifest.entries[i];
    Rng rng(derive_seed(config.seed, e.utterance_id));
    const std::size_t s = i / static_cast<std::size_t>(config.utts_per_speaker);
    corpus.audio[i] = synth_utterance(corpus.speakers[s], config.duration_s, kSampleRate, rng);
  });
  for (std::size_t i = 0; i < total; ++i)
    corpus.manifest.entries[i].duration_s = corpus.audio[i].duration_s();
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "wav", ec);
  if (ec) throw IoError("cannot create " + (dir / "wav").string() + ": " + ec.message());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    write_wav(dir / corpus.manifest.entries[i].path, corpus.audio[i]);
  write_manifest(corpus.manifest, dir / "manifest.tsv");
  std::ofstream os(dir / "speakers.tsv");
  if (!os) throw IoError("cannot write speakers.tsv in " + dir.string());
  os.precision(17);
  for (const auto& s : corpus.speakers) {
    os << s.speaker_id << '\t' << s.f0_base;
    for (double f : s.formant_centers) os << '\t' << f;
    for (double b : s.formant_bandwidths) os << '\t' << b;
    os << '\t' << s.jitter << '\n';
  }
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  corpus.manifest = read_manifest(dir / "manifest.tsv");
  corpus.audio.resize(corpus.manifest.entries.size());
  parallel_for(corpus.audio.size(), [&](std::size_t i) {
    corpus.audio[i] = load_wav(dir / corpus.manifest.entries[i].path);
    if (corpus.audio[i].sample_rate != kSampleRate)
      throw FormatError(corpus.manifest.entries[i].path + ": sample rate " +
                        std::to_string(corpus.audio[i].sample_rate) + " Hz, expected 16000 Hz");
  });
  std::ifstream is(dir / "speakers.tsv");
  std::string line;
  while (is && std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    SpeakerProfile s;
    ls >> s.speaker_id >> s.f0_base;
    for (double& f : s.formant_centers) ls >> f;
    for (double& b : s.formant_bandwidths) ls >> b;
    ls >> s.jitter;
    if (!ls) throw FormatError("malformed speakers.tsv line: " + line);
    corpus.speakers.push_back(s);
  }
  return corpus;
}

// ---------------------------------------------------------------- WAV

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

std::int16_t to_pcm16(double s) {
  const double code = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
  return static_cast<std::int16_t>(code);
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  const std::string where = path.string() + ": ";
  if (n < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
    throw FormatError(where + "not a RIFF/WAVE file");

  bool have_fmt = false;
  int channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const std::string id = bytes.substr(pos, 4);
    const std::uint32_t len = read_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > n) throw FormatError(where + "truncated '" + id + "' chunk");
    if (id == "fmt ") {
      if (len < 16) throw FormatError(where + "short fmt chunk");
      format = read_u16(p + body);
      channels = read_u16(p + body + 2);
      rate = read_u32(p + body + 4);
      bits = read_u16(p + body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(where + "data chunk before fmt chunk");
      if (format != 1) throw FormatError(where + "only PCM (format 1) is supported");
      if (channels != 1) throw FormatError(where + std::to_string(channels) + " channels, expected mono");
      if (bits != 16) throw FormatError(where + std::to_string(bits) + "-bit samples, expected 16-bit");
      if (rate == 0) throw FormatError(where + "zero sample rate");
      if (len % 2 != 0 || len == 0) throw FormatError(where + "bad data chunk length");
      std::vector<double> samples(len / 2);
      for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = static_cast<std::int16_t>(read_u16(p + body + 2 * i)) / 32768.0;
      return Waveform(std::move(samples), static_cast<int>(rate));
    }
    pos = body + len + (len & 1u);
  }
  throw FormatError(where + "no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  const auto data_len = static_cast<std::uint32_t>(w.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_len);
  for (double s : w.samples) put_u16(out, static_cast<std::uint16_t>(to_pcm16(s)));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

Waveform quantize_pcm16(const Waveform& w) {
  Waveform out = w;
  for (double& s : out.samples) s = to_pcm16(s) / 32768.0;
  return out;
}

// ---------------------------------------------------------------- cropping

CropOffsets draw_crop_offsets(std::size_t total_len, std::size_t segment_len, Rng& rng) {
  if (segment_len == 0) throw ContractError("segment length must be positive");
  if (total_len < 2 * segment_len)
    throw LengthError("utterance of " + std::to_string(total_len) +
                      " samples cannot hold two segments of " + std::to_string(segment_len));
  CropOffsets o;
  o.first = static_cast<std::size_t>(rng.uniform_int(total_len - 2 * segment_len + 1));
  const std::size_t lo = o.first + segment_len, hi = total_len - segment_len;
  o.second = lo + static_cast<std::size_t>(rng.uniform_int(hi - lo + 1));
  return o;
}

Waveform slice(const Waveform& w, std::size_t start, std::size_t len) {
  if (start + len > w.size()) throw LengthError("slice past the end of the waveform");
  return Waveform(std::vector<double>(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                      w.samples.begin() + static_cast<std::ptrdiff_t>(start + len)),
                  w.sample_rate);
}

std::pair<Waveform, Waveform> crop_two_nonoverlapping(const Waveform& u, double segment_len_s,
                                                      Rng& rng) {
  const std::size_t seg = samples_for(segment_len_s, u.sample_rate);
  const CropOffsets o = draw_crop_offsets(u.size(), seg, rng);
  return {slice(u, o.first, seg), slice(u, o.second, seg)};
}

}  // namespace ssk
