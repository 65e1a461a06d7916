// ssk/fft.h

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

#ifndef SSK_FFT_H_
#define SSK_FFT_H_

#include <complex>
#include <span>
#include <vector>

namespace ssk {

/// Real-to-complex FFT of a fixed size, backed by FFTW. Plans are shared per
/// size and created under a lock; execute calls are reentrant.
class RealFft {
 public:
  explicit RealFft(int n);

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  /// in has size() samples, out receives bins() values.
  void forward(const double* in, std::complex<double>* out) const;
  /// Unnormalized inverse: forward then inverse scales by size().
  void inverse(const std::complex<double>* in, double* out) const;

 private:
  int n_;
  void* forward_plan_;
  void* inverse_plan_;
};

int next_pow2(int n);

/// Full linear convolution, length a.size() + b.size() - 1, via FFT.
std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b);

}  // namespace ssk

#endif  // SSK_FFT_H_
