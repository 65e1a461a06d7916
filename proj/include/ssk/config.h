// ssk/config.h

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

#ifndef SSK_CONFIG_H_
#define SSK_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssk/augment.h"
#include "ssk/encoder.h"
#include "ssk/eval.h"
#include "ssk/features.h"
#include "ssk/losses.h"
#include "ssk/signal.h"
#include "ssk/trainer.h"

namespace ssk {

inline constexpr int kConfigVersion = 1;

struct CorpusSection {
  CorpusConfig synth;
  /// Load from disk instead of synthesizing.
  std::optional<std::filesystem::path> path;
};

struct EvalCorpusSection {
  CorpusConfig synth{16, 6, 4.0, 2, 1.8, 1000, "eval"};
  std::optional<std::filesystem::path> path;
  /// Augment every test utterance once, with assets independent of training.
  bool augment_test = true;
  std::uint64_t augment_seed = 4;
};

struct AssetSection {
  AssetConfig synth;
  std::uint64_t seed = 3;
  std::optional<std::filesystem::path> path;
};

struct GradcheckSection {
  int n = 4;
  int dim = 8;
  std::uint64_t seed = 42;
  double eps = 1e-6;
  double tolerance = 1e-6;
  int frames = 12;
  EncoderConfig encoder{5, {{4, 3, 1}, {4, 3, 2}}, 8, 7};
};

struct AblationSection {
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

/// One document with every module's settings. `seed` drives encoder init and
/// batch sampling; corpus and asset seeds are separate so data stays fixed
/// across training seeds.
struct ExperimentConfig {
  int config_version = kConfigVersion;
  std::uint64_t seed = 1;
  CorpusSection corpus;
  EvalCorpusSection eval_corpus;
  AssetSection assets;
  AugmentationPolicy augmentation;
  FeatureConfig features;
  EncoderConfig encoder;
  TrainConfig trainer;
  DcfParams eval;
  AblationSection ablation;
  GradcheckSection gradcheck;

  void validate() const;
  /// Encoder config with the experiment seed applied.
  EncoderConfig encoder_config() const;
  /// Trainer config with the experiment seed applied.
  TrainConfig train_config() const;
};

/// Strict parse: unknown keys, wrong types and a missing or unsupported
/// config_version raise ConfigError with `<source>:<line>:<col>` prefixes.
/// Relative paths resolve against base_dir.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "<config>",
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical YAML for the full config, defaults included.
std::string to_yaml(const ExperimentConfig& cfg);

/// 16 hex digits of FNV-1a over to_yaml(cfg).
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace ssk

#endif  // SSK_CONFIG_H_
