// src/features.cc

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

#include "ssk/features.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "ssk/error.h"
#include "ssk/fft.h"

namespace ssk {

int num_frames(std::size_t n_samples) {
  if (n_samples < static_cast<std::size_t>(kWindowLength)) return 0;
  return 1 + static_cast<int>((n_samples - kWindowLength) / kFrameShift);
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n)
    w[static_cast<std::size_t>(n)] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / length);
  return w;
}

namespace {

// Runs fn(frame_index, spectrum) for each STFT frame.
template <class Fn>
void for_each_frame(const Waveform& w, const std::vector<double>& window, Fn&& fn) {
  const int frames = num_frames(w.size());
  if (frames < 1)
    throw LengthError("waveform of " + std::to_string(w.size()) +
                      " samples is shorter than one 400-sample window");
  RealFft fft(kFftSize);
  std::vector<double> buf(kFftSize, 0.0);
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(fft.bins()));
  for (int f = 0; f < frames; ++f) {
    const double* src = w.samples.data() + static_cast<std::size_t>(f) * kFrameShift;
    for (int n = 0; n < kWindowLength; ++n) buf[static_cast<std::size_t>(n)] = src[n] * window[static_cast<std::size_t>(n)];
    fft.forward(buf.data(), spec.data());
    fn(f, spec);
  }
}

}  // namespace

Spectrogram stft(const Waveform& w) {
  static const std::vector<double> window = hamming_window(kWindowLength);
  Spectrogram s;
  s.frames = num_frames(w.size());
  s.bins = kFftSize / 2 + 1;
  s.values.resize(static_cast<std::size_t>(std::max(s.frames, 0)) * s.bins);
  for_each_frame(w, window, [&](int f, const std::vector<std::complex<double>>& spec) {
    std::copy(spec.begin(), spec.end(), s.values.begin() + static_cast<std::ptrdiff_t>(f) * s.bins);
  });
  return s;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(int sample_rate, int n_fft, int n_mels, double fmin, double fmax) {
  if (sample_rate <= 0 || n_fft < 2 || n_mels < 1)
    throw ConfigError("mel filterbank: bad sample rate, FFT size or filter count");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0))
    throw ConfigError("mel filterbank: need 0 <= fmin < fmax <= sample_rate / 2");
  MelFilterbank fb;
  fb.sample_rate = sample_rate;
  fb.n_fft = n_fft;
  fb.n_mels = n_mels;
  fb.fmin = fmin;
  fb.fmax = fmax;
  const int bins = n_fft / 2 + 1;
  fb.weights = Eigen::MatrixXd::Zero(n_mels, bins);
  const double mel_lo = hz_to_mel(fmin), mel_hi = hz_to_mel(fmax);
  const double step = (mel_hi - mel_lo) / (n_mels + 1);
  for (int m = 0; m < n_mels; ++m) {
    const double left = mel_lo + m * step, center = left + step, right = center + step;
    fb.center_hz.push_back(mel_to_hz(center));
    int first = -1, last = -1;
    for (int k = 0; k < bins; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / n_fft);
      double w = 0.0;
      if (mel > left && mel <= center)
        w = (mel - left) / (center - left);
      else if (mel > center && mel < right)
        w = (right - mel) / (right - center);
      if (w > 0.0) {
        fb.weights(m, k) = w;
        if (first < 0) first = k;
        last = k;
      }
    }
    if (first < 0)
      throw ConfigError("mel filter " + std::to_string(m) +
                        " covers no FFT bin; use fewer filters or a larger FFT");
    fb.first_bin.push_back(first);
    fb.last_bin.push_back(last);
  }
  return fb;
}

void MelFilterbank::apply(const double* power, double* out) const {
  for (int m = 0; m < n_mels; ++m) {
    double acc = 0.0;
    for (int k = first_bin[static_cast<std::size_t>(m)]; k <= last_bin[static_cast<std::size_t>(m)]; ++k)
      acc += weights(m, k) * power[k];
    out[m] = acc;
  }
}

void FeatureConfig::validate() const {
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= kSampleRate / 2.0))
    throw ConfigError("features: need 0 <= fmin_hz < fmax_hz <= 8000");
}

FeatureExtractor::FeatureExtractor(const FeatureConfig& config)
    : config_(config),
      filterbank_(mel_filterbank(kSampleRate, kFftSize, kNumMels, config.fmin_hz, config.fmax_hz)),
      window_(hamming_window(kWindowLength)) {}

LogMelSpectrogram FeatureExtractor::log_mel_raw(const Waveform& w) const {
  if (w.sample_rate != filterbank_.sample_rate)
    throw ContractError("feature extraction expects " + std::to_string(filterbank_.sample_rate) +
                        " Hz audio, got " + std::to_string(w.sample_rate) + " Hz");
  LogMelSpectrogram out;
  out.values.resize(kNumMels, std::max(num_frames(w.size()), 0));
  std::vector<double> power(kFftSize / 2 + 1), mel(kNumMels);
  for_each_frame(w, window_, [&](int f, const std::vector<std::complex<double>>& spec) {
    for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(spec[k]);
    filterbank_.apply(power.data(), mel.data());
    for (int m = 0; m < kNumMels; ++m) out.values(m, f) = std::log(std::max(mel[static_cast<std::size_t>(m)], kLogFloor));
  });
  return out;
}

LogMelSpectrogram FeatureExtractor::log_mel(const Waveform& w) const {
  LogMelSpectrogram out = log_mel_raw(w);
  // Shift by the first frame before averaging so a constant channel maps to
  // exact zeros.
  const Eigen::VectorXd first = out.values.col(0);
  out.values.colwise() -= first;
  out.values.colwise() -= Eigen::VectorXd(out.values.rowwise().mean());
  return out;
}

LogMelSpectrogram log_mel(const Waveform& w) {
  static const FeatureExtractor extractor;
  return extractor.log_mel(w);
}

void write_feature_csv(const std::filesystem::path& path, const LogMelSpectrogram& feats) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  char buf[32];
  for (int m = 0; m < feats.n_mels(); ++m) {
    for (int t = 0; t < feats.frames(); ++t) {
      std::snprintf(buf, sizeof buf, "%.9g", feats.values(m, t));
      if (t) os << ',';
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace ssk
