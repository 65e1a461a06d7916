// ssk/encoder.h

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

#ifndef SSK_ENCODER_H_
#define SSK_ENCODER_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ssk/autodiff.h"
#include "ssk/features.h"

namespace ssk {

struct ConvSpec {
  int channels = 128;
  int kernel = 3;
  int dilation = 1;

  bool operator==(const ConvSpec&) const = default;
};

/// Dilated 1-D conv stack, ReLU after each layer, mean+std pooling and an
/// affine projection to the embedding.
struct EncoderConfig {
  int input_dim = kNumMels;
  std::vector<ConvSpec> convs{{128, 5, 1}, {128, 3, 2}, {128, 3, 3}};
  int embedding_dim = 192;
  std::uint64_t seed = 0;

  void validate() const;
  /// Frames consumed by the conv stack for one output frame.
  int receptive_field() const;
  std::size_t parameter_count() const;

  bool operator==(const EncoderConfig&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor<double> value;
};

/// Parameters live in double precision; bind() places them on a tape of any
/// precision. Tensors: conv{i}.weight (Cout, K, Cin), conv{i}.bias (Cout),
/// head.weight (D, 2C), head.bias (D).
class Encoder {
 public:
  Encoder() = default;

  /// Glorot-uniform weights, zero biases, drawn from config.seed.
  static Encoder init(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  std::vector<NamedTensor>& params() { return params_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  std::size_t parameter_count() const;

  /// Registers every parameter on the tape, in params() order.
  template <class T>
  std::vector<Var<T>> bind(Tape<T>& tape) const;

  /// x is (B, T, input_dim), time-major; returns (B, embedding_dim).
  template <class T>
  Var<T> forward(Tape<T>& tape, std::span<const Var<T>> bound, Var<T> x) const;

  /// Raw embedding of one utterance. Throws LengthError when the features are
  /// shorter than the receptive field.
  Eigen::VectorXd encode(const LogMelSpectrogram& feats) const;

  /// Mean+std pooled conv output for one utterance (before the projection).
  Eigen::VectorXd pooled_statistics(const LogMelSpectrogram& feats) const;

  void save(const std::filesystem::path& path) const;
  static Encoder load(const std::filesystem::path& path);

  bool operator==(const Encoder& other) const;

 private:
  EncoderConfig config_;
  std::vector<NamedTensor> params_;
};

/// Packs equal-length feature matrices (each n_mels x T) into a (B, T, n_mels)
/// tensor.
template <class T>
Tensor<T> pack_features(std::span<const LogMelSpectrogram> feats);

/// Checks feature rows and frame count against the encoder. Throws ShapeError
/// or LengthError.
void check_encoder_input(const EncoderConfig& config, const LogMelSpectrogram& feats);

}  // namespace ssk

#endif  // SSK_ENCODER_H_
