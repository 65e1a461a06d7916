// src/losses.cc

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

#include "ssk/losses.h"

#include <algorithm>
#include <cmath>

#include "ssk/error.h"

namespace ssk {

namespace {
constexpr double kCosineMargin = 1e-12;
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::csl: return "csl";
    case LossVariant::acsg: return "acsg";
    case LossVariant::wacsg: return "wacsg";
    case LossVariant::wcsl: return "wcsl";
  }
  return "?";
}

std::string to_string(NegativeMode m) {
  return m == NegativeMode::literal ? "literal" : "all_other_utterances";
}

LossVariant parse_loss_variant(const std::string& name) {
  for (auto v : {LossVariant::csl, LossVariant::acsg, LossVariant::wacsg, LossVariant::wcsl})
    if (to_string(v) == name) return v;
  throw ConfigError("unknown loss variant '" + name + "' (expected csl, acsg, wacsg or wcsl)");
}

NegativeMode parse_negative_mode(const std::string& name) {
  for (auto m : {NegativeMode::literal, NegativeMode::all_other_utterances})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown negative mode '" + name + "' (expected literal or all_other_utterances)");
}

bool uses_clean(LossVariant v) { return v == LossVariant::acsg || v == LossVariant::wacsg; }
bool uses_weights(LossVariant v) { return v == LossVariant::wacsg || v == LossVariant::wcsl; }

void LossConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("loss: tau must be a positive number");
}

void EmbeddingBatch::validate(bool need_clean) const {
  if (noisy.rows() % 2 != 0) throw ShapeError("noisy embeddings must have 2N rows");
  if (n() < 2) throw DegenerateInputError("empty denominator: a batch needs at least two utterances");
  if (noisy.cols() < 1) throw ShapeError("embeddings have zero dimension");
  if (need_clean && (clean.rows() != n() || clean.cols() != noisy.cols()))
    throw ShapeError("clean embeddings must be N x D matching the noisy ones");
  auto check = [](const Eigen::MatrixXd& m, const char* what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (!m.row(r).allFinite()) throw DegenerateInputError(std::string(what) + " embedding is not finite");
      if (m.row(r).squaredNorm() == 0.0) throw DegenerateInputError(std::string(what) + " embedding has zero norm");
    }
  };
  check(noisy, "noisy");
  if (need_clean) check(clean, "clean");
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ShapeError("cosine: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine of a zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::pair<double, double> beta_weights(double s_n, double s_c) { return {std::exp(s_n), std::exp(s_c)}; }

bool is_negative(int i, int j, int k, int l, NegativeMode mode) {
  if (k == i) return false;
  return mode == NegativeMode::all_other_utterances || l != j;
}

PairSimilarities pair_similarities(const EmbeddingBatch& batch) {
  batch.validate(false);
  const Eigen::MatrixXd zn = batch.noisy.rowwise().normalized();
  PairSimilarities s;
  s.noisy_noisy = zn * zn.transpose();
  if (batch.clean.rows() > 0) {
    const Eigen::MatrixXd zc = batch.clean.rowwise().normalized();
    s.clean_noisy = zc * zn.transpose();
  }
  return s;
}

template <class T>
LossGraph<T> build_loss(Var<T> noisy, Var<T> clean, const LossConfig& cfg) {
  cfg.validate();
  const auto& ns = noisy.shape();
  if (ns.size() != 2 || ns[0] % 2 != 0) throw ShapeError("noisy embeddings must be (2N, D)");
  const int n = ns[0] / 2, rows = 2 * n;
  if (n < 2) throw DegenerateInputError("empty denominator: a batch needs at least two utterances");
  const bool with_clean = uses_clean(cfg.variant);
  if (with_clean) {
    if (clean.tape == nullptr) throw ContractError("variant " + to_string(cfg.variant) + " needs clean embeddings");
    const auto& cs = clean.shape();
    if (cs.size() != 2 || cs[0] != n || cs[1] != ns[1]) throw ShapeError("clean embeddings must be (N, D)");
  }
  const double inv_tau = 1.0 / cfg.tau;
  const double beta_scale = cfg.include_clean_anchor_tau_in_beta ? inv_tau : 1.0;
  Tape<T>& tape = *noisy.tape;

  auto weight = [&](Var<T> cos) {
    if (cfg.force_unit_beta) {
      Tensor<T> ones(cos.shape());
      std::fill(ones.data.begin(), ones.data.end(), T(1));
      return tape.constant(std::move(ones));
    }
    auto b = ad::exp(ad::scale(ad::clamp(cos, -1.0 + kCosineMargin, 1.0 - kCosineMargin), beta_scale));
    return cfg.detach_weights ? ad::detach(b) : b;
  };

  const auto zn = ad::l2_normalize(noisy);
  const auto snn = ad::matmul_nt(zn, zn);
  Var<T> logits = ad::scale(snn, inv_tau);
  if (uses_weights(cfg.variant)) logits = ad::mul(weight(snn), logits);

  std::vector<int> pos_nn(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) pos_nn[static_cast<std::size_t>(r)] = (r / 2 * 2) * rows + (r / 2 * 2 + 1);
  Var<T> pos = ad::scale(ad::gather(snn, pos_nn), inv_tau);

  if (with_clean) {
    const auto zc = ad::l2_normalize(clean);
    const auto scn = ad::matmul_nt(zc, zn);  // (N, 2N)
    std::vector<int> owner(static_cast<std::size_t>(rows));
    std::vector<int> pos_cn(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      owner[static_cast<std::size_t>(r)] = r / 2;
      pos_cn[static_cast<std::size_t>(r)] = (r / 2) * rows + (r / 2 * 2 + 1);
    }
    const auto sc = ad::gather_rows(scn, owner);  // (2N, 2N), row of the anchor's utterance
    Var<T> companion = ad::scale(sc, inv_tau);
    if (cfg.variant == LossVariant::wacsg) companion = ad::mul(weight(sc), companion);
    logits = ad::add(logits, companion);
    pos = ad::add(pos, ad::scale(ad::gather(scn, pos_cn), inv_tau));
  }

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows) * rows, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < rows; ++c)
      mask[static_cast<std::size_t>(r) * rows + c] = is_negative(r / 2, r % 2, c / 2, c % 2, cfg.negative_mode);

  LossGraph<T> g;
  g.per_pair = ad::add(ad::masked_row_logsumexp(logits, std::move(mask)), ad::scale(pos, -1.0));
  g.total = ad::mean(g.per_pair);
  return g;
}

template LossGraph<float> build_loss<float>(Var<float>, Var<float>, const LossConfig&);
template LossGraph<double> build_loss<double>(Var<double>, Var<double>, const LossConfig&);
template LossGraph<long double> build_loss<long double>(Var<long double>, Var<long double>, const LossConfig&);

namespace {

template <class T>
struct BatchVars {
  Var<T> noisy;
  Var<T> clean;
};

template <class T = double>
BatchVars<T> place(Tape<T>& tape, const EmbeddingBatch& batch, const LossConfig& cfg) {
  batch.validate(uses_clean(cfg.variant));
  BatchVars<T> v;
  v.noisy = tape.variable(tensor_cast<T>(Tensor<double>::from_matrix(batch.noisy)));
  if (uses_clean(cfg.variant)) v.clean = tape.variable(tensor_cast<T>(Tensor<double>::from_matrix(batch.clean)));
  return v;
}

}  // namespace

std::vector<double> pair_losses(const EmbeddingBatch& batch, const LossConfig& cfg) {
  Tape<double> tape;
  const auto v = place(tape, batch, cfg);
  const auto g = build_loss(v.noisy, v.clean, cfg);
  const auto& d = g.per_pair.value().data;
  return std::vector<double>(d.begin(), d.end());
}

double pair_loss(const EmbeddingBatch& batch, int i, int j, const LossConfig& cfg) {
  if (i < 0 || i >= batch.n() || j < 0 || j > 1) throw ContractError("pair_loss: anchor index out of range");
  return pair_losses(batch, cfg)[static_cast<std::size_t>(2 * i + j)];
}

double csl_loss(const EmbeddingBatch& batch, int i, int j, LossConfig cfg) {
  cfg.variant = LossVariant::csl;
  return pair_loss(batch, i, j, cfg);
}

double acsg_loss(const EmbeddingBatch& batch, int i, int j, LossConfig cfg) {
  cfg.variant = LossVariant::acsg;
  return pair_loss(batch, i, j, cfg);
}

double wacsg_loss(const EmbeddingBatch& batch, int i, int j, LossConfig cfg) {
  cfg.variant = LossVariant::wacsg;
  return pair_loss(batch, i, j, cfg);
}

double total_loss(const EmbeddingBatch& batch, const LossConfig& cfg) {
  Tape<double> tape;
  const auto v = place(tape, batch, cfg);
  return build_loss(v.noisy, v.clean, cfg).total.value()[0];
}

LossGradients loss_gradients(const EmbeddingBatch& batch, const LossConfig& cfg) {
  Tape<double> tape;
  const auto v = place(tape, batch, cfg);
  const auto g = build_loss(v.noisy, v.clean, cfg);
  tape.backward(g.total);
  LossGradients out;
  out.loss = g.total.value()[0];
  out.noisy = v.noisy.grad().matrix();
  if (v.clean.tape) out.clean = v.clean.grad().matrix();
  return out;
}

FiniteDiffReport loss_gradient_check(const EmbeddingBatch& batch, const LossConfig& cfg, double eps) {
  // Analytic gradients in double; the difference quotients are taken in
  // extended precision so their rounding error stays well below the tolerance.
  Tape<double> tape;
  const auto v = place(tape, batch, cfg);
  const auto g = build_loss(v.noisy, v.clean, cfg);
  std::vector<Var<double>> wrt{v.noisy};
  if (v.clean.tape) wrt.push_back(v.clean);
  const auto analytic = tape.gradient(g.total, wrt);

  Tape<long double> ref;
  const auto w = place<long double>(ref, batch, cfg);
  const auto rg = build_loss(w.noisy, w.clean, cfg);
  std::vector<Var<long double>> ref_wrt{w.noisy};
  if (w.clean.tape) ref_wrt.push_back(w.clean);
  return compare_gradients(analytic, numeric_gradient<long double>(ref, rg.total, ref_wrt, eps));
}

}  // namespace ssk
