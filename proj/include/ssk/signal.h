// ssk/signal.h

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

#ifndef SSK_SIGNAL_H_
#define SSK_SIGNAL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ssk/random.h"

namespace ssk {

inline constexpr int kSampleRate = 16000;

/// Mono audio with samples nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }

  /// Throws ContractError unless sample_rate > 0, length >= 1 and all samples
  /// are finite.
  void validate() const;
};

/// Number of samples covering `seconds` at `sample_rate`, rounded.
std::size_t samples_for(double seconds, int sample_rate);

/// A synthetic talker: glottal pulse train at a jittered F0 through a fixed
/// cascade of three formant resonators.
struct SpeakerProfile {
  int speaker_id = 0;
  double f0_base = 120.0;
  std::array<double, 3> formant_centers{500.0, 1500.0, 2500.0};
  std::array<double, 3> formant_bandwidths{80.0, 120.0, 180.0};
  double jitter = 0.01;

  void validate() const;
};

/// Draws a profile from the desk-scale speaker distribution.
SpeakerProfile random_speaker(int speaker_id, Rng& rng);

/// Renders one utterance of `duration_s` for the profile. Deterministic given
/// the rng state. Output is peak-normalized below full scale and quantized to
/// the 16-bit grid, so it survives a WAV round trip unchanged.
Waveform synth_utterance(const SpeakerProfile& speaker, double duration_s, int sample_rate,
                         Rng& rng);

struct ManifestEntry {
  std::string utterance_id;
  int speaker_id = 0;
  std::string path;  // relative to the manifest's directory
  double duration_s = 0.0;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  int sample_rate = kSampleRate;

  /// Unique utterance ids; every duration at least min_duration_s.
  void validate(double min_duration_s = 0.0) const;
  /// Index of the entry with the given relative path, or -1.
  int find_path(const std::string& path) const;
  int find_id(const std::string& utterance_id) const;
};

/// `<utterance_id>\t<speaker_id>\t<relative_path>\t<duration_s>` per line.
void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& file);
CorpusManifest read_manifest(const std::filesystem::path& file);

struct CorpusConfig {
  int n_speakers = 64;
  int utts_per_speaker = 20;
  double duration_s = 4.0;
  std::uint64_t seed = 1;
  double segment_len_s = 1.8;
  int first_speaker_id = 0;
  std::string id_prefix = "spk";

  void validate() const;
};

/// Manifest plus audio held in memory; audio[i] belongs to manifest.entries[i].
struct Corpus {
  CorpusManifest manifest;
  std::vector<SpeakerProfile> speakers;
  std::vector<Waveform> audio;

  std::size_t size() const { return audio.size(); }
};

/// Synthesizes the corpus. Utterance k of speaker s is rendered from
/// derive_seed(seed, utterance_id), so the output does not depend on the
/// thread schedule.
Corpus synth_corpus(const CorpusConfig& config);

/// Writes `<dir>/manifest.tsv`, `<dir>/speakers.tsv` and `<dir>/wav/*.wav`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
/// Reads a manifest and its WAV files. Rejects sample rates other than 16 kHz.
Corpus load_corpus(const std::filesystem::path& dir);

/// PCM 16-bit mono WAV. Samples are divided by 32768.
Waveform load_wav(const std::filesystem::path& path);
/// Writes PCM 16-bit mono, rounding to the nearest code and clipping.
void write_wav(const std::filesystem::path& path, const Waveform& w);

/// Rounds samples onto the 16-bit grid used by write_wav.
Waveform quantize_pcm16(const Waveform& w);

struct CropOffsets {
  std::size_t first = 0;
  std::size_t second = 0;
};

/// First start uniform on [0, len - 2 seg], second uniform on
/// [first + seg, len - seg]. The two ranges never overlap.
CropOffsets draw_crop_offsets(std::size_t total_len, std::size_t segment_len, Rng& rng);

/// Two non-overlapping segments of segment_len_s; the first starts earlier.
std::pair<Waveform, Waveform> crop_two_nonoverlapping(const Waveform& u, double segment_len_s,
                                                      Rng& rng);

/// Copies [start, start + len) of w.
Waveform slice(const Waveform& w, std::size_t start, std::size_t len);

}  // namespace ssk

#endif  // SSK_SIGNAL_H_
