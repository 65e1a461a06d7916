// ssk/eval.h

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

#ifndef SSK_EVAL_H_
#define SSK_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ssk/encoder.h"
#include "ssk/features.h"
#include "ssk/signal.h"

namespace ssk {

struct Trial {
  std::string enroll;  // manifest-relative path
  std::string test;
  bool target = false;

  bool operator==(const Trial&) const = default;
};

/// Parallel arrays; label 1 is a target trial.
struct ScoreSet {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return scores.size(); }
  std::size_t n_target() const;
  std::size_t n_nontarget() const;
  /// Throws ContractError without both classes, on length mismatch or on a
  /// non-finite score.
  void validate() const;
};

struct DcfParams {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;

  void validate() const;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

/// Candidate thresholds: -inf, midpoints between consecutive distinct sorted
/// scores, +inf. A trial is accepted when its score is >= the threshold.
std::vector<double> candidate_thresholds(const ScoreSet& s);

/// Sweeps the candidate thresholds and linearly interpolates between the two
/// adjacent operating points where FAR - FRR changes sign.
EerResult compute_eer(const ScoreSet& s);

/// min over candidate thresholds of c_miss p P_miss + c_fa (1 - p) P_fa,
/// divided by min(c_miss p, c_fa (1 - p)).
DcfResult compute_min_dcf(const ScoreSet& s, const DcfParams& p = {});

/// Every unordered pair of distinct utterances in the manifest; target when
/// the speakers match.
std::vector<Trial> all_pair_trials(const CorpusManifest& manifest);

/// `<label 0|1> <enroll_path> <test_path>` per line.
void write_trials(const std::filesystem::path& path, const std::vector<Trial>& trials);
std::vector<Trial> read_trials(const std::filesystem::path& path);

/// Full-utterance embeddings for every corpus entry (no cropping).
Eigen::MatrixXd embed_corpus(const Encoder& encoder, const Corpus& corpus,
                             const FeatureConfig& features = {});

/// Cosine of L2-normalized embeddings per trial. Throws ManifestError when a
/// trial names an utterance the corpus lacks.
ScoreSet score_trials(const Encoder& encoder, const Corpus& corpus, const std::vector<Trial>& trials,
                      const FeatureConfig& features = {});

/// The same from precomputed embeddings (rows follow the manifest).
ScoreSet score_trials(const Eigen::MatrixXd& embeddings, const CorpusManifest& manifest,
                      const std::vector<Trial>& trials);

/// `<score> <label>` per line, shortest round-trip decimals.
void write_scores(const std::filesystem::path& path, const ScoreSet& s);
ScoreSet read_scores(const std::filesystem::path& path);

struct EvalResults {
  double eer = 0.0;
  double min_dcf = 0.0;
  std::size_t n_trials = 0;
  std::string config_hash;
};

EvalResults evaluate_scores(const ScoreSet& s, const DcfParams& p = {});

/// {"eer": ..., "min_dcf": ..., "n_trials": ..., "config_hash": ...}
void write_results_json(const std::filesystem::path& path, const EvalResults& r);
EvalResults read_results_json(const std::filesystem::path& path);

}  // namespace ssk

#endif  // SSK_EVAL_H_
