// ssk/augment.h

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

#ifndef SSK_AUGMENT_H_
#define SSK_AUGMENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssk/random.h"
#include "ssk/signal.h"

namespace ssk {

enum class NoiseKind { ambient, music, babble };

std::string to_string(NoiseKind kind);

struct NoiseAsset {
  NoiseKind kind = NoiseKind::ambient;
  Waveform waveform;
};

/// Room impulse response. taps[0] is the direct path and the largest tap.
struct Rir {
  std::vector<double> taps;
  double rt60_s = 0.3;

  void validate() const;
};

enum class AugmentChoice { additive_noise, music, babble, reverb, noise_plus_reverb };

std::string to_string(AugmentChoice choice);
/// Throws ConfigError for unknown names.
AugmentChoice parse_augment_choice(const std::string& name);

struct AugmentationPolicy {
  std::vector<AugmentChoice> choices{AugmentChoice::additive_noise, AugmentChoice::music,
                                     AugmentChoice::babble, AugmentChoice::reverb,
                                     AugmentChoice::noise_plus_reverb};
  double snr_low_db = 5.0;
  double snr_high_db = 20.0;

  void validate() const;
};

struct AssetBank {
  std::vector<NoiseAsset> noises;
  std::vector<Rir> rirs;

  /// Indices into noises with the given kind.
  std::vector<std::size_t> of_kind(NoiseKind kind) const;
};

/// clean + g * noise with g = sqrt(P_clean / (P_noise * 10^(snr_db / 10))),
/// powers taken over the whole segment.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

/// Mean square of the samples.
double signal_power(const std::vector<double>& x);

/// Linear convolution with the RIR via FFT, truncated to the input length and
/// rescaled so its peak magnitude equals the input's.
Waveform apply_rir(const Waveform& clean, const Rir& rir);

/// Exponentially decaying noise tail behind a unit direct-path tap. The tail's
/// energy falls 60 dB over rt60_s.
Rir synth_rir(double rt60_s, int sample_rate, Rng& rng);

struct AssetConfig {
  int noises_per_kind = 4;
  double noise_duration_s = 6.0;
  int n_rirs = 16;
  double rt60_min_s = 0.1;
  double rt60_max_s = 0.6;
  int babble_talkers = 5;
};

/// Synthetic stand-ins for the noise, music, babble and RIR corpora.
/// Same seed, same bank.
AssetBank synth_assets(std::uint64_t seed, int sample_rate = kSampleRate,
                       const AssetConfig& config = {});

/// Loads `<dir>/{ambient,music,babble}/*.wav` and `<dir>/rir/*.wav` when
/// present; RIR files are normalized so the direct path is 1.
AssetBank load_assets(const std::filesystem::path& dir);
void write_assets(const AssetBank& bank, const std::filesystem::path& dir);

/// What apply_policy did; useful for previews and tests.
struct AugmentRecord {
  AugmentChoice choice = AugmentChoice::additive_noise;
  std::optional<double> snr_db;
  std::optional<std::size_t> noise_index;
  std::optional<std::size_t> noise_offset;
  std::optional<std::size_t> rir_index;
};

/// Picks one policy choice uniformly, then the asset, excerpt position and SNR
/// uniformly. Deterministic given the rng state. Throws ConfigError when a
/// chosen kind has no assets.
Waveform apply_policy(const Waveform& segment, const AugmentationPolicy& policy,
                      const AssetBank& assets, Rng& rng, AugmentRecord* record = nullptr);

}  // namespace ssk

#endif  // SSK_AUGMENT_H_
