// ssk/experiment.h

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

#ifndef SSK_EXPERIMENT_H_
#define SSK_EXPERIMENT_H_

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ssk/config.h"

namespace ssk {

/// Training corpus, held-out evaluation corpus with its trial list, and the
/// augmentation assets, either synthesized or loaded per the config.
struct Workspace {
  Corpus train;
  Corpus eval;
  AssetBank train_assets;
  std::vector<Trial> trials;
};

Workspace prepare_workspace(const ExperimentConfig& cfg);

/// Held-out corpus as configured, test utterances augmented when requested.
Corpus make_eval_corpus(const ExperimentConfig& cfg);

TrainData train_data(const ExperimentConfig& cfg, const Workspace& ws);

/// Scores the workspace trials and summarizes them.
EvalResults evaluate_encoder(const Encoder& encoder, const ExperimentConfig& cfg, const Workspace& ws,
                             ScoreSet* scores = nullptr);

/// results.json and report.md in out_dir, plus history.csv when history is non-empty.
void emit_report(const TrainHistory& history, const EvalResults& results, const ExperimentConfig& cfg,
                 const std::filesystem::path& out_dir);

struct AblationVariant {
  std::string name;     // row label
  LossVariant variant;
};

/// W-ACSG, w/o weighting (ACSG), w/o clean segments (weighted CSL), w/o both (CSL).
const std::vector<AblationVariant>& ablation_variants();

struct AblationRun {
  std::string name;
  LossVariant variant;
  std::uint64_t seed = 0;
  TrainHistory history;
  EvalResults results;
  double train_seconds = 0.0;
};

struct AblationRow {
  std::string name;
  LossVariant variant;
  double eer_percent = 0.0;  // mean over seeds
  double min_dcf = 0.0;      // mean over seeds
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<AblationRun> runs;
  double untrained_eer_percent = 0.0;
  double untrained_min_dcf = 0.0;
  std::string config_hash;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains the four variants from each seed on identical batch streams and
/// evaluates every run on the held-out trials.
AblationReport ablate(const ExperimentConfig& cfg, const Workspace& ws, const ProgressFn& progress = {});

/// ablation.csv, ablation.json, report.md and one history file per run.
void write_ablation(const AblationReport& report, const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct GradcheckResult {
  std::string label;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Finite-difference checks of the total loss with respect to all 3N
/// embeddings for every variant and flag combination, and with respect to all
/// parameters of the tiny encoder.
std::vector<GradcheckResult> run_gradcheck(const ExperimentConfig& cfg);

/// Random N x 2 noisy plus N clean embeddings.
EmbeddingBatch random_batch(int n, int dim, std::uint64_t seed);

}  // namespace ssk

#endif  // SSK_EXPERIMENT_H_
