// src/fft.cc

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

#include "ssk/fft.h"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

#include "ssk/error.h"

namespace ssk {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Plans live for the process; FFTW plans are immutable once created.
std::pair<fftw_plan, fftw_plan> shared_plans(int n) {
  static std::map<int, std::pair<fftw_plan, fftw_plan>> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* real = fftw_alloc_real(static_cast<std::size_t>(n));
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fftw_plan fwd = fftw_plan_dft_r2c_1d(n, real, spec, flags);
  fftw_plan inv = fftw_plan_dft_c2r_1d(n, spec, real, flags | FFTW_DESTROY_INPUT);
  fftw_free(real);
  fftw_free(spec);
  if (!fwd || !inv) throw Error("FFTW could not plan a transform of size " + std::to_string(n));
  return cache[n] = {fwd, inv};
}

}  // namespace

RealFft::RealFft(int n) : n_(n) {
  if (n < 2) throw ContractError("FFT size must be at least 2");
  auto [f, i] = shared_plans(n);
  forward_plan_ = f;
  inverse_plan_ = i;
}

void RealFft::forward(const double* in, std::complex<double>* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFft::inverse(const std::complex<double>* in, double* out) const {
  // c2r overwrites its input.
  std::vector<std::complex<double>> scratch(in, in + bins());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(scratch.data()), out);
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DegenerateInputError("convolution of an empty sequence");
  const int out_len = static_cast<int>(a.size() + b.size() - 1);
  const int n = std::max(2, next_pow2(out_len));
  RealFft fft(n);
  std::vector<double> buf(static_cast<std::size_t>(n), 0.0);
  std::vector<std::complex<double>> fa(static_cast<std::size_t>(fft.bins())), fb(fa.size());
  std::copy(a.begin(), a.end(), buf.begin());
  fft.forward(buf.data(), fa.data());
  std::fill(buf.begin(), buf.end(), 0.0);
  std::copy(b.begin(), b.end(), buf.begin());
  fft.forward(buf.data(), fb.data());
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.inverse(fa.data(), buf.data());
  buf.resize(static_cast<std::size_t>(out_len));
  for (double& v : buf) v /= n;
  return buf;
}

}  // namespace ssk
