// tests/eval_test.cc

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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.h"
#include "ssk/error.h"
#include "ssk/eval.h"
#include "ssk/random.h"
#include "test_util.h"

namespace ssk {
namespace {

// Scores on a 1e-3 lattice so ties occur and the grid oracle can resolve
// every distinct value.
ScoreSet lattice_scores(std::size_t n, double shift, std::uint64_t seed) {
  Rng rng(seed);
  ScoreSet s;
  for (std::size_t k = 0; k < n; ++k) {
    const bool target = rng.uniform() < 0.3 || k == 0;
    const double x = rng.normal() + (target && k != 1 ? shift : 0.0);
    s.scores.push_back(std::round(x * 1000.0) / 1000.0);
    s.labels.push_back(target && k != 1 ? 1 : 0);
  }
  return s;
}

TEST_SUITE("eval") {

TEST_CASE("contract checks") {
  ScoreSet s{{0.1, 0.2}, {1, 1}};
  CHECK_THROWS_AS(compute_eer(s), ContractError);
  s = ScoreSet{{0.1, 0.2}, {1}};
  CHECK_THROWS_AS(compute_eer(s), ContractError);
  s = ScoreSet{{0.1, std::nan("")}, {1, 0}};
  CHECK_THROWS_AS(compute_min_dcf(s), ContractError);
  DcfParams p;
  p.p_target = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("candidate thresholds") {
  const ScoreSet s{{0.3, 0.1, 0.3, 0.2}, {1, 0, 0, 1}};
  const auto t = candidate_thresholds(s);
  REQUIRE(t.size() == 4);
  CHECK(std::isinf(t.front()));
  CHECK(t[1] == doctest::Approx(0.15));
  CHECK(t[2] == doctest::Approx(0.25));
  CHECK(std::isinf(t.back()));
}

TEST_CASE("metrics match exhaustive oracles on 1000-trial score sets") {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ScoreSet s = lattice_scores(1000, 0.2 * static_cast<double>(seed % 8), seed);
    for (const DcfParams& p : {DcfParams{}, DcfParams{0.05, 1.0, 1.0}, DcfParams{0.5, 10.0, 1.0}}) {
      const double got = compute_min_dcf(s, p).min_dcf;
      CHECK(got == oracle::min_dcf(s, p));
    }
    const double eer = compute_eer(s).eer;
    const double ref = oracle::eer_grid(s, 1e-5);
    worst = std::max(worst, std::abs(eer - ref));
    CHECK(std::abs(eer - ref) <= 1e-6);
  }
  MESSAGE("worst EER difference ", worst);
}

TEST_CASE("separated and identical distributions") {
  ScoreSet perfect;
  for (int k = 0; k < 50; ++k) {
    perfect.scores.push_back(1.0 + k * 0.01);
    perfect.labels.push_back(1);
    perfect.scores.push_back(-1.0 - k * 0.01);
    perfect.labels.push_back(0);
  }
  const auto r = evaluate_scores(perfect);
  CHECK(r.eer == 0.0);
  CHECK(r.min_dcf == 0.0);
  CHECK(r.n_trials == 100);

  ScoreSet same;
  for (int k = 0; k < 100; ++k) {
    same.scores.push_back((k / 2) % 10);
    same.labels.push_back(k % 2);
  }
  CHECK(compute_eer(same).eer == doctest::Approx(0.5));
  ScoreSet tied{std::vector<double>(10, 0.7), {1, 0, 1, 0, 1, 0, 1, 0, 1, 0}};
  CHECK(compute_eer(tied).eer == doctest::Approx(0.5));
  CHECK(compute_min_dcf(tied).min_dcf == 1.0);

  ScoreSet flipped = perfect;
  for (auto& l : flipped.labels) l = 1 - l;
  CHECK(compute_eer(flipped).eer == 1.0);
}

TEST_CASE("monotone transforms and shuffles leave the metrics unchanged") {
  for (std::uint64_t seed = 30; seed < 40; ++seed) {
    const ScoreSet s = lattice_scores(1000, 1.0, seed);
    const auto e = compute_eer(s).eer;
    const auto d = compute_min_dcf(s).min_dcf;
    ScoreSet t = s;
    for (double& x : t.scores) x = std::exp(3.0 * x) + 7.0;
    CHECK(compute_eer(t).eer == e);
    CHECK(compute_min_dcf(t).min_dcf == d);

    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (std::size_t k = perm.size() - 1; k > 0; --k) std::swap(perm[k], perm[rng.uniform_int(k + 1)]);
    ScoreSet sh;
    for (std::size_t k : perm) {
      sh.scores.push_back(s.scores[k]);
      sh.labels.push_back(s.labels[k]);
    }
    CHECK(compute_eer(sh).eer == e);
    CHECK(compute_min_dcf(sh).min_dcf == d);
  }
}

TEST_CASE("trial list and score files") {
  CorpusManifest m;
  m.entries = {{"a1", 1, "a/1.wav", 4.0}, {"a2", 1, "a/2.wav", 4.0}, {"b1", 2, "b/1.wav", 4.0}};
  const auto trials = all_pair_trials(m);
  REQUIRE(trials.size() == 3);
  CHECK(std::count_if(trials.begin(), trials.end(), [](const Trial& t) { return t.target; }) == 1);
  test::TempDir d("eval");
  write_trials(d / "trials.txt", trials);
  CHECK(read_trials(d / "trials.txt") == trials);
  test::spit(d / "bad.txt", "1 a/1.wav\n");
  CHECK_THROWS_AS(read_trials(d / "bad.txt"), FormatError);

  const ScoreSet s = lattice_scores(50, 1.0, 3);
  ScoreSet odd = s;
  odd.scores[0] = 0.1 + 0.2;
  write_scores(d / "scores.txt", odd);
  const ScoreSet back = read_scores(d / "scores.txt");
  CHECK(back.scores == odd.scores);
  CHECK(back.labels == odd.labels);

  EvalResults r{0.125, 0.5, 42, "0123456789abcdef"};
  write_results_json(d / "r.json", r);
  const EvalResults rb = read_results_json(d / "r.json");
  CHECK(rb.eer == r.eer);
  CHECK(rb.min_dcf == r.min_dcf);
  CHECK(rb.n_trials == 42);
  CHECK(rb.config_hash == r.config_hash);
}

TEST_CASE("cosine scoring of embeddings") {
  CorpusManifest m;
  m.entries = {{"x", 1, "x.wav", 4.0}, {"y", 1, "y.wav", 4.0}, {"z", 2, "z.wav", 4.0}};
  Eigen::MatrixXd e(3, 3);
  e << 1, 0, 0, 2, 0, 0, 0, 5, 0;
  const std::vector<Trial> trials{{"x.wav", "y.wav", true}, {"x.wav", "z.wav", false}, {"x.wav", "x.wav", true}};
  const ScoreSet s = score_trials(e, m, trials);
  CHECK(s.scores[0] == doctest::Approx(1.0));
  CHECK(s.scores[1] == 0.0);
  CHECK(s.scores[2] == doctest::Approx(1.0));
  CHECK(s.labels == std::vector<std::uint8_t>{1, 0, 1});
  const std::vector<Trial> missing{{"x.wav", "nope.wav", false}};
  CHECK_THROWS_AS(score_trials(e, m, missing), ManifestError);
}

TEST_CASE("encoder scoring on a synthetic corpus") {
  const Corpus c = synth_corpus(CorpusConfig{3, 2, 4.0, 5});
  const Encoder enc = Encoder::init(EncoderConfig{kNumMels, {{8, 3, 1}}, 8, 1});
  const auto trials = all_pair_trials(c.manifest);
  CHECK(trials.size() == 15);
  const ScoreSet s = score_trials(enc, c, trials);
  CHECK(s.size() == 15);
  CHECK(s.n_target() == 3);
  for (double x : s.scores) CHECK(std::abs(x) <= 1.0 + 1e-12);
  const Eigen::MatrixXd e = embed_corpus(enc, c);
  CHECK(e.rows() == 6);
  const ScoreSet again = score_trials(e, c.manifest, trials);
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(again.scores[k] == doctest::Approx(s.scores[k]).epsilon(1e-12));
}

}  // TEST_SUITE

}  // namespace
}  // namespace ssk
