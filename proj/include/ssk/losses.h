// ssk/losses.h

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

#ifndef SSK_LOSSES_H_
#define SSK_LOSSES_H_

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ssk/autodiff.h"

namespace ssk {

// Contrastive objectives over a batch of N utterances. Each utterance i gives
// two augmented segments e(i,0), e(i,1) and the clean embedding c(i) of the
// unaugmented first segment. Anchors are the 2N noisy segments; clean
// embeddings only ever appear as companions.
//
//   CSL     per-pair loss  lse_{neg}( s(ij,kl) )                 - s(i0,i1)
//   ACSG                   lse_{neg}( s(ij,kl) + t(i,kl) )       - s(i0,i1) - t(i,i1)
//   W-CSL                  lse_{neg}( bn s(ij,kl) )              - s(i0,i1)
//   W-ACSG                 lse_{neg}( bn s(ij,kl) + bc t(i,kl) ) - s(i0,i1) - t(i,i1)
//
// with s = cos(e, e) / tau, t = cos(c, e) / tau and weights b = exp(s) (or
// exp(cos) when the tau-in-beta flag is off). The negative set of anchor (i,j)
// is k != i with l != j (literal) or any l (all_other_utterances).

enum class LossVariant { csl, acsg, wacsg, wcsl };
enum class NegativeMode { literal, all_other_utterances };

std::string to_string(LossVariant v);
std::string to_string(NegativeMode m);
/// Accepts the names printed by to_string. Throws ConfigError.
LossVariant parse_loss_variant(const std::string& name);
NegativeMode parse_negative_mode(const std::string& name);

bool uses_clean(LossVariant v);
bool uses_weights(LossVariant v);

struct LossConfig {
  double tau = 1.0;
  LossVariant variant = LossVariant::wacsg;
  bool detach_weights = true;
  NegativeMode negative_mode = NegativeMode::literal;
  bool include_clean_anchor_tau_in_beta = true;
  /// Test hook: every weight is exactly 1.
  bool force_unit_beta = false;

  void validate() const;
};

/// noisy is 2N x D with row 2i + j; clean is N x D (may be empty for
/// variants without clean companions).
struct EmbeddingBatch {
  Eigen::MatrixXd noisy;
  Eigen::MatrixXd clean;

  int n() const { return static_cast<int>(noisy.rows() / 2); }
  /// Throws DegenerateInputError for N < 2 or zero/non-finite rows, ShapeError
  /// for inconsistent shapes.
  void validate(bool need_clean) const;
};

/// Cached cosines: noisy-noisy (2N x 2N) and clean-noisy (N x 2N).
struct PairSimilarities {
  Eigen::MatrixXd noisy_noisy;
  Eigen::MatrixXd clean_noisy;
};

PairSimilarities pair_similarities(const EmbeddingBatch& batch);

/// a.b / (|a| |b|). Throws DegenerateInputError for a zero vector.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// (exp(s_n), exp(s_c)).
std::pair<double, double> beta_weights(double s_n, double s_c);

/// Whether column 2k + l is a negative for anchor row 2i + j.
bool is_negative(int i, int j, int k, int l, NegativeMode mode);

template <class T>
struct LossGraph {
  Var<T> per_pair;  // (2N), entry 2i + j
  Var<T> total;     // scalar mean of per_pair
};

/// Records the loss on a tape. noisy is (2N, D); clean is (N, D) and is
/// ignored (may be a default Var) for variants without clean companions.
template <class T>
LossGraph<T> build_loss(Var<T> noisy, Var<T> clean, const LossConfig& cfg);

/// All 2N per-pair losses, entry 2i + j.
std::vector<double> pair_losses(const EmbeddingBatch& batch, const LossConfig& cfg);
double pair_loss(const EmbeddingBatch& batch, int i, int j, const LossConfig& cfg);

/// Per-pair loss of anchor (i, j) with the variant fixed by the function name.
double csl_loss(const EmbeddingBatch& batch, int i, int j, LossConfig cfg);
double acsg_loss(const EmbeddingBatch& batch, int i, int j, LossConfig cfg);
double wacsg_loss(const EmbeddingBatch& batch, int i, int j, LossConfig cfg);

/// Mean of the 2N per-pair losses.
double total_loss(const EmbeddingBatch& batch, const LossConfig& cfg);

struct LossGradients {
  double loss = 0.0;
  Eigen::MatrixXd noisy;  // d total / d noisy embeddings
  Eigen::MatrixXd clean;  // zero-sized when the variant has no clean companions
};

LossGradients loss_gradients(const EmbeddingBatch& batch, const LossConfig& cfg);

/// Central-difference check of total_loss with respect to every embedding.
FiniteDiffReport loss_gradient_check(const EmbeddingBatch& batch, const LossConfig& cfg,
                                     double eps = 1e-6);

}  // namespace ssk

#endif  // SSK_LOSSES_H_
