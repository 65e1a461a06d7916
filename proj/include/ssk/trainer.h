// ssk/trainer.h

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

#ifndef SSK_TRAINER_H_
#define SSK_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ssk/augment.h"
#include "ssk/encoder.h"
#include "ssk/features.h"
#include "ssk/losses.h"
#include "ssk/random.h"
#include "ssk/signal.h"

namespace ssk {

enum class Precision { f32, f64 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& name);

struct TrainConfig {
  int batch_size = 64;
  double segment_len_s = 1.8;
  int epochs = 20;
  double lr0 = 1e-3;
  double lr_decay = 0.95;
  int decay_every = 5;
  LossConfig loss;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;
  /// Record wall time in the history's seconds column. Off by default so
  /// history files are reproducible byte for byte.
  bool history_wall_time = false;

  void validate() const;
};

/// lr0 * decay^floor(epoch / decay_every), epoch counted from 0.
double lr_at(const TrainConfig& config, int epoch);
/// The same with the default schedule.
double lr_at(int epoch);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update in place. Moments are created on the first
/// call. Throws ContractError when gradient shapes do not match.
void adam_step(AdamState& state, std::vector<NamedTensor>& params,
               const std::vector<Tensor<double>>& grads, double lr);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
  std::optional<double> val_eer;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  bool operator==(const TrainHistory&) const = default;
};

/// `epoch,mean_loss,lr,seconds,val_eer`, shortest round-trip decimals, empty
/// val_eer when absent.
std::string format_history_csv(const TrainHistory& history);
TrainHistory parse_history_csv(const std::string& text);
void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);
TrainHistory read_history_csv(const std::filesystem::path& path);

/// Everything batch assembly reads. Speaker labels in the corpus are used for
/// sampling only.
struct TrainData {
  const Corpus* corpus = nullptr;
  AugmentationPolicy policy;
  const AssetBank* assets = nullptr;
  FeatureConfig features;
};

struct Batch {
  std::vector<std::size_t> utterances;      // corpus index per batch item
  std::vector<int> speakers;                // sampling bookkeeping only
  std::vector<LogMelSpectrogram> noisy;     // 2N, entry 2i + j
  std::vector<LogMelSpectrogram> clean;     // N, empty when not requested
  std::vector<AugmentRecord> augmentations; // 2N, matching noisy
};

/// Draws N utterances from N distinct speakers, crops two non-overlapping
/// segments from each, augments both and keeps the first one clean. Each item
/// draws from its own generator seeded from rng, so the result does not depend
/// on the thread schedule. Throws ConfigError when the corpus has fewer than
/// N speakers.
Batch assemble_batch(const TrainData& data, const FeatureExtractor& extractor, int n,
                     double segment_len_s, Rng& rng, bool with_clean = true);

struct TrainOptions {
  /// When set, the encoder is saved to `<dir>/checkpoint.ckpt` after every epoch.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Optional validation EER per epoch.
  std::function<std::optional<double>(const Encoder&, int epoch)> validate;
  /// Progress callback after each epoch.
  std::function<void(const std::string& run, const EpochRecord&)> on_epoch;
};

struct TrainRun {
  std::string name;
  TrainConfig config;
  Encoder encoder;
  TrainHistory history;
  AdamState adam;
  double seconds = 0.0;
};

/// Trains one encoder. Throws NumericError naming the batch, step and loss
/// when the loss is not finite.
TrainRun train(const TrainConfig& config, const Encoder& initial, const TrainData& data,
               const TrainOptions& options = {});

/// Trains several encoders in lockstep on one batch stream. Every config must
/// agree on everything except the loss; each run then sees exactly the batches
/// a standalone train() with the same seed would see.
std::vector<TrainRun> train_lockstep(const std::vector<std::pair<std::string, TrainConfig>>& runs,
                                     const Encoder& initial, const TrainData& data,
                                     const TrainOptions& options = {});

/// Mean total loss of one batch for the given encoder, in double precision.
double batch_loss(const Encoder& encoder, const Batch& batch, const LossConfig& loss);

}  // namespace ssk

#endif  // SSK_TRAINER_H_
