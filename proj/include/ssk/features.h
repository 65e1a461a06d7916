// ssk/features.h

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

#ifndef SSK_FEATURES_H_
#define SSK_FEATURES_H_

#include <complex>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "ssk/signal.h"

namespace ssk {

inline constexpr int kWindowLength = 400;  // 25 ms at 16 kHz
inline constexpr int kFrameShift = 160;    // 10 ms
inline constexpr int kFftSize = 512;
inline constexpr int kNumMels = 80;
inline constexpr double kLogFloor = 1e-10;

/// 1 + floor((n - 400) / 160); zero when n is shorter than one window.
int num_frames(std::size_t n_samples);

/// Periodic Hamming window, 0.54 - 0.46 cos(2 pi n / N).
std::vector<double> hamming_window(int length);

/// Complex STFT frames, row-major (frames x bins).
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<std::complex<double>> values;

  std::complex<double> at(int frame, int bin) const {
    return values[static_cast<std::size_t>(frame) * bins + bin];
  }
};

/// 25 ms periodic-Hamming frames every 10 ms, no padding, 512-point FFT.
/// Throws LengthError when the waveform is shorter than one window.
Spectrogram stft(const Waveform& w);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters with centers equally spaced on the HTK mel scale.
struct MelFilterbank {
  int sample_rate = kSampleRate;
  int n_fft = kFftSize;
  int n_mels = kNumMels;
  double fmin = 20.0;
  double fmax = 7600.0;
  Eigen::MatrixXd weights;          // n_mels x (n_fft / 2 + 1)
  std::vector<double> center_hz;    // per filter
  std::vector<int> first_bin;       // nonzero support of each row
  std::vector<int> last_bin;

  /// weights * power, using the nonzero support only.
  void apply(const double* power, double* out) const;
};

MelFilterbank mel_filterbank(int sample_rate = kSampleRate, int n_fft = kFftSize,
                             int n_mels = kNumMels, double fmin = 20.0, double fmax = 7600.0);

/// n_mels x T log mel energies.
struct LogMelSpectrogram {
  Eigen::MatrixXd values;
  double frame_hop_s = 0.010;
  double frame_len_s = 0.025;

  int n_mels() const { return static_cast<int>(values.rows()); }
  int frames() const { return static_cast<int>(values.cols()); }
};

struct FeatureConfig {
  double fmin_hz = 20.0;
  double fmax_hz = 7600.0;

  void validate() const;
};

/// Holds the window, filterbank and FFT plan for repeated extraction.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureConfig& config = {});

  /// log(max(mel energy, 1e-10)), before any normalization.
  LogMelSpectrogram log_mel_raw(const Waveform& w) const;
  /// log_mel_raw followed by subtracting each channel's mean over time.
  LogMelSpectrogram log_mel(const Waveform& w) const;

  const MelFilterbank& filterbank() const { return filterbank_; }

 private:
  FeatureConfig config_;
  MelFilterbank filterbank_;
  std::vector<double> window_;
};

/// log_mel with the default configuration.
LogMelSpectrogram log_mel(const Waveform& w);

/// One row per mel channel, comma-separated, 9 significant digits.
void write_feature_csv(const std::filesystem::path& path, const LogMelSpectrogram& feats);

}  // namespace ssk

#endif  // SSK_FEATURES_H_
