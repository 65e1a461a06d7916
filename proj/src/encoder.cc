// src/encoder.cc

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

#include "ssk/encoder.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ssk/error.h"
#include "ssk/random.h"

namespace ssk {

void EncoderConfig::validate() const {
  if (input_dim < 1) throw ConfigError("encoder: input_dim must be positive");
  if (convs.empty()) throw ConfigError("encoder: at least one conv layer is required");
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& c = convs[i];
    const std::string where = "encoder: conv layer " + std::to_string(i);
    if (c.channels < 1) throw ConfigError(where + " needs at least one channel");
    if (c.kernel < 1 || c.kernel % 2 == 0) throw ConfigError(where + " kernel size must be odd");
    if (c.dilation < 1) throw ConfigError(where + " dilation must be positive");
  }
  if (embedding_dim < 8) throw ConfigError("encoder: embedding_dim must be at least 8");
}

int EncoderConfig::receptive_field() const {
  int rf = 1;
  for (const auto& c : convs) rf += c.dilation * (c.kernel - 1);
  return rf;
}

std::size_t EncoderConfig::parameter_count() const {
  std::size_t n = 0;
  int cin = input_dim;
  for (const auto& c : convs) {
    n += static_cast<std::size_t>(c.channels) * c.kernel * cin + c.channels;
    cin = c.channels;
  }
  n += static_cast<std::size_t>(embedding_dim) * 2 * cin + embedding_dim;
  return n;
}

namespace {

Tensor<double> glorot(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  Tensor<double> t(std::move(shape));
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-a, a);
  return t;
}

}  // namespace

Encoder Encoder::init(const EncoderConfig& config) {
  config.validate();
  Encoder enc;
  enc.config_ = config;
  Rng rng(derive_seed(config.seed, "encoder/init"));
  int cin = config.input_dim;
  for (std::size_t i = 0; i < config.convs.size(); ++i) {
    const auto& c = config.convs[i];
    const std::string p = "conv" + std::to_string(i);
    enc.params_.push_back({p + ".weight", glorot({c.channels, c.kernel, cin}, cin * c.kernel,
                                                 c.channels * c.kernel, rng)});
    enc.params_.push_back({p + ".bias", Tensor<double>({c.channels})});
    cin = c.channels;
  }
  enc.params_.push_back(
      {"head.weight", glorot({config.embedding_dim, 2 * cin}, 2 * cin, config.embedding_dim, rng)});
  enc.params_.push_back({"head.bias", Tensor<double>({config.embedding_dim})});
  return enc;
}

std::size_t Encoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
std::vector<Var<T>> Encoder::bind(Tape<T>& tape) const {
  std::vector<Var<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(tape.parameter(tensor_cast<T>(p.value)));
  return out;
}

template <class T>
Var<T> Encoder::forward(Tape<T>& tape, std::span<const Var<T>> bound, Var<T> x) const {
  (void)tape;
  if (bound.size() != params_.size())
    throw ContractError("encoder forward: expected " + std::to_string(params_.size()) +
                        " bound parameters, got " + std::to_string(bound.size()));
  const auto& shape = x.shape();
  if (shape.size() != 3 || shape[2] != config_.input_dim)
    throw ShapeError("encoder input must be (B, T, " + std::to_string(config_.input_dim) + "), got " +
                     x.value().shape_string());
  if (shape[1] < config_.receptive_field())
    throw LengthError("encoder input has " + std::to_string(shape[1]) + " frames; needs at least " +
                      std::to_string(config_.receptive_field()));
  Var<T> h = x;
  for (std::size_t i = 0; i < config_.convs.size(); ++i)
    h = ad::relu(ad::conv1d(h, bound[2 * i], bound[2 * i + 1], config_.convs[i].dilation));
  const std::size_t head = 2 * config_.convs.size();
  return ad::affine(ad::stats_pool(h), bound[head], bound[head + 1]);
}

template <class T>
Tensor<T> pack_features(std::span<const LogMelSpectrogram> feats) {
  if (feats.empty()) throw ContractError("pack_features: empty batch");
  const int rows = feats[0].n_mels(), frames = feats[0].frames();
  Tensor<T> t({static_cast<int>(feats.size()), frames, rows});
  T* out = t.data.data();
  for (const auto& f : feats) {
    if (f.n_mels() != rows || f.frames() != frames)
      throw ShapeError("pack_features: feature matrices differ in shape");
    for (int tt = 0; tt < frames; ++tt)
      for (int m = 0; m < rows; ++m) *out++ = static_cast<T>(f.values(m, tt));
  }
  return t;
}

template Tensor<float> pack_features<float>(std::span<const LogMelSpectrogram>);
template Tensor<double> pack_features<double>(std::span<const LogMelSpectrogram>);
template Tensor<long double> pack_features<long double>(std::span<const LogMelSpectrogram>);

void check_encoder_input(const EncoderConfig& config, const LogMelSpectrogram& feats) {
  if (feats.n_mels() != config.input_dim)
    throw ShapeError("features have " + std::to_string(feats.n_mels()) + " rows; encoder expects " +
                     std::to_string(config.input_dim));
  if (feats.frames() < config.receptive_field())
    throw LengthError("features have " + std::to_string(feats.frames()) +
                      " frames; encoder needs at least " + std::to_string(config.receptive_field()));
}

Eigen::VectorXd Encoder::encode(const LogMelSpectrogram& feats) const {
  check_encoder_input(config_, feats);
  Tape<double> tape;
  auto bound = bind(tape);
  auto x = tape.constant(pack_features<double>(std::span(&feats, 1)));
  auto e = forward<double>(tape, bound, x);
  return Eigen::Map<const Eigen::VectorXd>(e.value().data.data(), config_.embedding_dim);
}

Eigen::VectorXd Encoder::pooled_statistics(const LogMelSpectrogram& feats) const {
  check_encoder_input(config_, feats);
  Tape<double> tape;
  auto bound = bind(tape);
  Var<double> h = tape.constant(pack_features<double>(std::span(&feats, 1)));
  for (std::size_t i = 0; i < config_.convs.size(); ++i)
    h = ad::relu(ad::conv1d(h, bound[2 * i], bound[2 * i + 1], config_.convs[i].dilation));
  auto s = ad::stats_pool(h);
  return Eigen::Map<const Eigen::VectorXd>(s.value().data.data(),
                                           static_cast<Eigen::Index>(s.value().size()));
}

bool Encoder::operator==(const Encoder& other) const {
  if (!(config_ == other.config_) || params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name != other.params_[i].name || params_[i].value.shape != other.params_[i].value.shape ||
        params_[i].value.data != other.params_[i].value.data)
      return false;
  return true;
}

// Checkpoint layout, all integers little-endian:
//   "SSKCKPT\0" | u32 version | u32 input_dim | u32 n_convs
//   | n_convs x (u32 channels, u32 kernel, u32 dilation) | u32 embedding_dim
//   | u64 seed | u32 n_tensors
//   | n_tensors x (u32 name_len, name bytes, u32 rank, rank x u32 dims, f64 data)
namespace {

constexpr char kMagic[8] = {'S', 'S', 'K', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <class V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class V>
V get(std::istream& is, const std::string& what) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw FormatError("checkpoint truncated while reading " + what);
  return v;
}

}  // namespace

void Encoder::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(config_.input_dim));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(config_.convs.size()));
  for (const auto& c : config_.convs) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(c.channels));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(c.kernel));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(c.dilation));
  }
  put<std::uint32_t>(os, static_cast<std::uint32_t>(config_.embedding_dim));
  put<std::uint64_t>(os, config_.seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(p.value.data.data()),
             static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Encoder Encoder::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError(path.string() + ": not an ssk checkpoint");
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  EncoderConfig cfg;
  cfg.input_dim = static_cast<int>(get<std::uint32_t>(is, "input_dim"));
  const auto n_convs = get<std::uint32_t>(is, "layer count");
  if (n_convs > 64) throw FormatError(path.string() + ": implausible layer count");
  cfg.convs.clear();
  for (std::uint32_t i = 0; i < n_convs; ++i) {
    ConvSpec c;
    c.channels = static_cast<int>(get<std::uint32_t>(is, "channels"));
    c.kernel = static_cast<int>(get<std::uint32_t>(is, "kernel"));
    c.dilation = static_cast<int>(get<std::uint32_t>(is, "dilation"));
    cfg.convs.push_back(c);
  }
  cfg.embedding_dim = static_cast<int>(get<std::uint32_t>(is, "embedding_dim"));
  cfg.seed = get<std::uint64_t>(is, "seed");
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  // Shapes come from a fresh init; the file must match them exactly.
  Encoder enc = init(cfg);
  const auto n_tensors = get<std::uint32_t>(is, "tensor count");
  if (n_tensors != enc.params_.size())
    throw FormatError(path.string() + ": expected " + std::to_string(enc.params_.size()) +
                      " tensors, found " + std::to_string(n_tensors));
  for (auto& p : enc.params_) {
    const auto len = get<std::uint32_t>(is, "tensor name");
    std::string name(len, '\0');
    if (len > 256 || !is.read(name.data(), len)) throw FormatError(path.string() + ": bad tensor name");
    if (name != p.name) throw FormatError(path.string() + ": expected tensor " + p.name + ", found " + name);
    const auto rank = get<std::uint32_t>(is, "rank");
    std::vector<int> shape;
    for (std::uint32_t r = 0; r < rank && r < 8; ++r)
      shape.push_back(static_cast<int>(get<std::uint32_t>(is, "dims")));
    if (shape != p.value.shape) throw FormatError(path.string() + ": shape mismatch for " + name);
    if (!is.read(reinterpret_cast<char*>(p.value.data.data()),
                 static_cast<std::streamsize>(p.value.size() * sizeof(double))))
      throw FormatError(path.string() + ": truncated data for " + name);
    for (double v : p.value.data)
      if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite value in " + name);
  }
  return enc;
}

template std::vector<Var<float>> Encoder::bind<float>(Tape<float>&) const;
template std::vector<Var<double>> Encoder::bind<double>(Tape<double>&) const;
template std::vector<Var<long double>> Encoder::bind<long double>(Tape<long double>&) const;
template Var<long double> Encoder::forward<long double>(Tape<long double>&, std::span<const Var<long double>>,
                                                        Var<long double>) const;
template Var<float> Encoder::forward<float>(Tape<float>&, std::span<const Var<float>>, Var<float>) const;
template Var<double> Encoder::forward<double>(Tape<double>&, std::span<const Var<double>>,
                                              Var<double>) const;

}  // namespace ssk
