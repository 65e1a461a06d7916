// tests/autodiff_test.cc

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

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "ssk/autodiff.h"
#include "ssk/error.h"
#include "ssk/random.h"

namespace ssk {
namespace {

Tensor<double> randn(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

// Values bounded away from zero so kinks (relu, clamp) and the log domain
// stay out of the finite-difference stencil.
Tensor<double> rand_away(std::vector<int> shape, Rng& rng, double lo, double hi) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.data) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo, hi);
  return t;
}

template <class T>
using Graph = std::pair<Var<T>, std::vector<Var<T>>>;

// Analytic gradient in double against central differences taken in long
// double, where roundoff is far below the 1e-6 tolerance.
template <class Build>
double op_error(Build&& build) {
  Tape<double> td;
  auto [out_d, leaves_d] = build(td);
  const auto analytic = td.gradient(out_d, leaves_d);
  Tape<long double> tl;
  auto [out_l, leaves_l] = build(tl);
  const auto numeric = numeric_gradient<long double>(tl, out_l, leaves_l, 1e-6);
  return compare_gradients(analytic, numeric).max_rel_error;
}

// Reduces any op output to a scalar through a fixed random projection.
template <class T>
Var<T> project(Var<T> y, const Tensor<double>& w) {
  return ad::sum(ad::mul(y, y.tape->constant(tensor_cast<T>(w))));
}

TEST_SUITE("autodiff") {

TEST_CASE("forward values") {
  Tape<double> t;
  auto x = t.variable(Tensor<double>({3}, {-1.0, 0.0, 2.0}));
  CHECK(ad::relu(x).value().data == Buffer<double>{0.0, 0.0, 2.0});
  auto v = t.variable(Tensor<double>({1, 2}, {3.0, 4.0}));
  const auto n = ad::l2_normalize(v).value();
  CHECK(n[0] == doctest::Approx(0.6));
  CHECK(n[1] == doctest::Approx(0.8));
  auto big = t.variable(Tensor<double>({2}, {1000.0, 1000.0}));
  const double lse = ad::logsumexp(big).value()[0];
  CHECK(std::isfinite(lse));
  CHECK(lse == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK_THROWS_AS(ad::l2_normalize(t.variable(Tensor<double>({1, 2}, {0.0, 0.0}))), DegenerateInputError);
  CHECK_THROWS_AS(ad::log(t.variable(Tensor<double>({1}, {-1.0}))), DegenerateInputError);
  CHECK_THROWS_AS(ad::add(x, big), ShapeError);
  CHECK_THROWS_AS(ad::masked_row_logsumexp(t.variable(Tensor<double>({1, 2}, {1.0, 2.0})), {0, 0}), ContractError);
}

TEST_CASE("conv1d and stats_pool against loops") {
  Rng rng(1);
  const int B = 2, T = 9, Cin = 3, Cout = 4, K = 3, d = 2;
  const auto x = randn({B, T, Cin}, rng), w = randn({Cout, K, Cin}, rng), b = randn({Cout}, rng);
  Tape<double> tape;
  const auto y = ad::conv1d(tape.constant(x), tape.constant(w), tape.constant(b), d).value();
  const int To = T - d * (K - 1);
  REQUIRE(y.shape == std::vector<int>{B, To, Cout});
  for (int bb = 0; bb < B; ++bb)
    for (int t = 0; t < To; ++t)
      for (int o = 0; o < Cout; ++o) {
        double acc = b[o];
        for (int k = 0; k < K; ++k)
          for (int c = 0; c < Cin; ++c) acc += w[(o * K + k) * Cin + c] * x[(bb * T + t + k * d) * Cin + c];
        CHECK(y[(bb * To + t) * Cout + o] == doctest::Approx(acc));
      }

  const auto p = ad::stats_pool(tape.constant(x)).value();
  REQUIRE(p.shape == std::vector<int>{B, 2 * Cin});
  for (int bb = 0; bb < B; ++bb)
    for (int c = 0; c < Cin; ++c) {
      double m = 0.0, v = 0.0;
      for (int t = 0; t < T; ++t) m += x[(bb * T + t) * Cin + c];
      m /= T;
      for (int t = 0; t < T; ++t) v += std::pow(x[(bb * T + t) * Cin + c] - m, 2);
      v /= T;
      CHECK(p[bb * 2 * Cin + c] == doctest::Approx(m));
      CHECK(p[bb * 2 * Cin + Cin + c] == doctest::Approx(std::sqrt(v + 1e-8)));
    }

  // Constant input: the deviation half collapses to sqrt(eps).
  Tensor<double> flat({1, 5, 2});
  std::fill(flat.data.begin(), flat.data.end(), 0.7);
  const auto pf = ad::stats_pool(tape.constant(flat)).value();
  CHECK(pf[2] == doctest::Approx(1e-4));
  CHECK(pf[3] == doctest::Approx(1e-4));
}

TEST_CASE("gradient examples") {
  Tape<double> t;
  auto x = t.variable(Tensor<double>({1}, {2.0}));
  auto g = t.gradient(ad::sum(ad::relu(x)), std::vector<Var<double>>{x});
  CHECK(g[0][0] == 1.0);

  Tape<double> t2;
  auto a = t2.variable(Tensor<double>({2}, {1.0, 2.0}));
  auto ga = t2.gradient(ad::dot(a, a), std::vector<Var<double>>{a});
  CHECK(ga[0].data == Buffer<double>{2.0, 4.0});

  // Cosine at parallel vectors has zero gradient.
  Tape<double> t3;
  auto u = t3.variable(Tensor<double>({1, 3}, {0.3, -1.2, 2.0}));
  auto v = t3.constant(Tensor<double>({1, 3}, {0.6, -2.4, 4.0}));
  auto cosv = ad::sum(ad::matmul_nt(ad::l2_normalize(u), ad::l2_normalize(v)));
  auto gu = t3.gradient(cosv, std::vector<Var<double>>{u});
  for (double d : gu[0].data) CHECK(std::abs(d) < 1e-15);

  CHECK_THROWS_AS(t3.backward(u), ContractError);
}

TEST_CASE("every primitive passes a finite-difference check") {
  Rng rng(2);
  const int trials = 100;
  double worst = 0.0;
  auto record = [&](const std::string& name, double err) {
    worst = std::max(worst, err);
    CHECK_MESSAGE(err <= 1e-6, name, " relative error ", err);
  };
  for (int trial = 0; trial < trials; ++trial) {
    const auto x2 = randn({3, 4}, rng), y2 = randn({3, 4}, rng), z2 = randn({2, 4}, rng);
    const auto w = randn({5, 4}, rng), b = randn({5}, rng);
    const auto seq = randn({2, 7, 3}, rng), cw = randn({4, 3, 3}, rng), cb = randn({4}, rng);
    const auto away = rand_away({3, 4}, rng, 0.1, 2.0);
    const auto pos = rand_away({3, 4}, rng, 0.2, 3.0);
    const auto v1 = randn({6}, rng), v2 = randn({6}, rng);

    record("affine", op_error([&]<class T>(Tape<T>& t) {
      auto X = t.variable(tensor_cast<T>(x2)), W = t.variable(tensor_cast<T>(w)), B = t.variable(tensor_cast<T>(b));
      return Graph<T>{ad::sum(ad::scale(ad::affine(X, W, B), 0.5)), {X, W, B}};
    }));
    const auto pc = randn({2, 3, 4}, rng);
    record("conv1d", op_error([&]<class T>(Tape<T>& t) {
      auto X = t.variable(tensor_cast<T>(seq)), W = t.variable(tensor_cast<T>(cw)), B = t.variable(tensor_cast<T>(cb));
      return Graph<T>{project(ad::conv1d(X, W, B, 2), pc), {X, W, B}};
    }));
    const auto pr = randn({3, 4}, rng);
    record("relu", op_error([&]<class T>(Tape<T>& t) {
      auto X = t.variable(tensor_cast<T>(away));
      return Graph<T>{project(ad::relu(X), pr), {X}};
    }));
    const auto ps = randn({2, 6}, rng);
    record("stats_pool", op_error([&]<class T>(Tape<T>& t) {
      auto X = t.variable(tensor_cast<T>(seq));
      return Graph<T>{project(ad::stats_pool(X), ps), {X}};
    }));
    record("l2_normalize", op_error([&]<class T>(Tape<T>& t) {
      auto X = t.variable(tensor_cast<T>(x2));
      return Graph<T>{project(ad::l2_normalize(X), pr), {X}};
    }));
    record("dot", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(v1)), B = t.variable(tensor_cast<T>(v2));
      return Graph<T>{ad::dot(A, B), {A, B}};
    }));
    const auto pm = randn({3, 2}, rng);
    record("matmul_nt", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(x2)), B = t.variable(tensor_cast<T>(z2));
      return Graph<T>{project(ad::matmul_nt(A, B), pm), {A, B}};
    }));
    record("add", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(x2)), B = t.variable(tensor_cast<T>(y2));
      return Graph<T>{project(ad::add(A, B), pr), {A, B}};
    }));
    record("mul", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(x2)), B = t.variable(tensor_cast<T>(y2));
      return Graph<T>{project(ad::mul(A, B), pr), {A, B}};
    }));
    record("exp", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(x2));
      return Graph<T>{project(ad::exp(A), pr), {A}};
    }));
    record("log", op_error([&]<class T>(Tape<T>& t) {
      Tensor<double> p = pos;
      for (double& v : p.data) v = std::abs(v);
      auto A = t.variable(tensor_cast<T>(p));
      return Graph<T>{project(ad::log(A), pr), {A}};
    }));
    record("clamp", op_error([&]<class T>(Tape<T>& t) {
      Tensor<double> c = away;
      for (double& v : c.data) v = std::abs(v) < 1.0 ? v * 0.8 : v * 1.2;  // clear of the bounds
      auto A = t.variable(tensor_cast<T>(c));
      return Graph<T>{project(ad::clamp(A, -1.0, 1.0), pr), {A}};
    }));
    record("logsumexp", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(x2));
      return Graph<T>{ad::logsumexp(A), {A}};
    }));
    std::vector<std::uint8_t> mask(12);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) mask[r * 4 + c] = (r + c) % 3 != 0;
    const auto pl = randn({3}, rng);
    record("masked_row_logsumexp", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(x2));
      return Graph<T>{project(ad::masked_row_logsumexp(A, mask), pl), {A}};
    }));
    const auto pg = randn({4, 4}, rng);
    record("gather_rows", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(x2));
      return Graph<T>{project(ad::gather_rows(A, {2, 0, 2, 1}), pg), {A}};
    }));
    const auto pf = randn({5}, rng);
    record("gather", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(x2));
      return Graph<T>{project(ad::gather(A, {0, 5, 11, 5, 7}), pf), {A}};
    }));
    record("mean", op_error([&]<class T>(Tape<T>& t) {
      auto A = t.variable(tensor_cast<T>(x2));
      return Graph<T>{ad::mean(ad::mul(A, A)), {A}};
    }));
  }
  MESSAGE("worst primitive relative error ", worst);
}

TEST_CASE("finite_diff_check harness") {
  Rng rng(3);
  {
    // Linear map: central differences are exact up to roundoff.
    Tape<double> t;
    auto x = t.parameter(randn({4}, rng));
    auto c = t.constant(randn({4}, rng));
    auto out = ad::dot(x, c);
    const std::vector<Var<double>> params{x};
    CHECK(finite_diff_check(t, out, params).max_rel_error <= 1e-10);
  }
  {
    Tape<double> t;
    auto x = t.parameter(randn({4}, rng));
    auto out = ad::sum(t.constant(randn({3}, rng)));
    const std::vector<Var<double>> params{x};
    const auto rep = finite_diff_check(t, out, params);
    CHECK(rep.max_rel_error == 0.0);
    CHECK(rep.coordinates == 4);
  }
  {
    // Cosine similarities fed to a log-sum-exp, dimension 8.
    Tape<double> t;
    auto a = t.parameter(randn({3, 8}, rng));
    auto b = t.parameter(randn({4, 8}, rng));
    auto out = ad::logsumexp(ad::scale(ad::matmul_nt(ad::l2_normalize(a), ad::l2_normalize(b)), 2.0));
    const std::vector<Var<double>> params{a, b};
    const auto rep = finite_diff_check(t, out, params);
    CHECK(rep.max_rel_error <= 1e-6);
    CHECK(rep.coordinates == 56);
  }
}

TEST_CASE("linearity of gradients") {
  Rng rng(4);
  const auto a0 = randn({2, 3}, rng);
  Tape<double> t;
  auto a = t.variable(a0);
  auto f = ad::sum(ad::exp(a));
  auto g = ad::sum(ad::mul(a, a));
  const auto gf = t.gradient(f, std::vector<Var<double>>{a});
  const auto gg = t.gradient(g, std::vector<Var<double>>{a});
  const auto gs = t.gradient(ad::add(f, g), std::vector<Var<double>>{a});
  for (std::size_t i = 0; i < a0.size(); ++i) CHECK(gs[0][i] == doctest::Approx(gf[0][i] + gg[0][i]));
}

TEST_CASE("detach, replay and parameters") {
  Tape<double> t;
  auto x = t.parameter(Tensor<double>({2}, {1.0, 2.0}));
  auto frozen = ad::detach(ad::exp(x));
  auto out = ad::sum(ad::mul(frozen, x));
  const auto g = t.gradient(out, std::vector<Var<double>>{x});
  CHECK(g[0][0] == doctest::Approx(std::exp(1.0)));
  CHECK(g[0][1] == doctest::Approx(std::exp(2.0)));
  CHECK(t.parameters().size() == 1);

  // Replay after a leaf update recomputes everything but the snapshot.
  t.set_value(x, Tensor<double>({2}, {3.0, 4.0}));
  t.forward();
  CHECK(out.value()[0] == doctest::Approx(std::exp(1.0) * 3.0 + std::exp(2.0) * 4.0));
  CHECK_THROWS(t.set_value(x, Tensor<double>({3}, {1.0, 2.0, 3.0})));
}

TEST_CASE("forward evaluation is deterministic") {
  Rng rng(5);
  const auto x = randn({2, 12, 3}, rng), w = randn({4, 3, 3}, rng), b = randn({4}, rng);
  auto run = [&] {
    Tape<double> t;
    return ad::stats_pool(ad::relu(ad::conv1d(t.constant(x), t.constant(w), t.constant(b), 3))).value().data;
  };
  CHECK(run() == run());
}

}  // TEST_SUITE

}  // namespace
}  // namespace ssk
