// src/eval.cc

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

#include "ssk/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ssk/error.h"
#include "ssk/parallel.h"

namespace ssk {

std::size_t ScoreSet::n_target() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

std::size_t ScoreSet::n_nontarget() const { return labels.size() - n_target(); }

void ScoreSet::validate() const {
  if (scores.size() != labels.size()) throw ContractError("score set: scores and labels differ in length");
  for (auto l : labels)
    if (l > 1) throw ContractError("score set: labels must be 0 or 1");
  if (n_target() == 0 || n_nontarget() == 0)
    throw ContractError("score set needs at least one target and one nontarget trial");
  for (double s : scores)
    if (!std::isfinite(s)) throw ContractError("score set contains a non-finite score");
}

void DcfParams::validate() const {
  if (!(p_target > 0.0 && p_target < 1.0)) throw ConfigError("dcf: p_target must lie in (0, 1)");
  if (!(c_miss > 0.0) || !(c_fa > 0.0)) throw ConfigError("dcf: costs must be positive");
}

namespace {

struct OperatingPoint {
  double threshold;
  std::size_t misses;       // targets below threshold
  std::size_t false_alarms; // nontargets at or above threshold
};

std::vector<OperatingPoint> sweep(const ScoreSet& s) {
  s.validate();
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<OperatingPoint> pts;
  std::size_t misses = 0, fa = s.n_nontarget();
  pts.push_back({-inf, misses, fa});
  for (std::size_t k = 0; k < order.size();) {
    const double v = s.scores[order[k]];
    for (; k < order.size() && s.scores[order[k]] == v; ++k) {
      if (s.labels[order[k]])
        ++misses;
      else
        --fa;
    }
    const double next = k < order.size() ? 0.5 * (v + s.scores[order[k]]) : inf;
    pts.push_back({next, misses, fa});
  }
  return pts;
}

}  // namespace

std::vector<double> candidate_thresholds(const ScoreSet& s) {
  std::vector<double> out;
  for (const auto& p : sweep(s)) out.push_back(p.threshold);
  return out;
}

EerResult compute_eer(const ScoreSet& s) {
  const auto pts = sweep(s);
  const double nt = static_cast<double>(s.n_target()), nn = static_cast<double>(s.n_nontarget());
  auto far = [&](const OperatingPoint& p) { return static_cast<double>(p.false_alarms) / nn; };
  auto frr = [&](const OperatingPoint& p) { return static_cast<double>(p.misses) / nt; };
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double d = far(pts[k]) - frr(pts[k]);
    if (d > 0.0) continue;
    if (d == 0.0) return {far(pts[k]), pts[k].threshold};
    // k >= 1 here: the first point has FRR = 0 and FAR = 1.
    const auto& a = pts[k - 1];
    const auto& b = pts[k];
    const double da = far(a) - frr(a);
    const double alpha = da / (da - d);
    EerResult r;
    r.eer = far(a) + alpha * (far(b) - far(a));
    if (std::isinf(a.threshold))
      r.threshold = b.threshold;
    else if (std::isinf(b.threshold))
      r.threshold = a.threshold;
    else
      r.threshold = a.threshold + alpha * (b.threshold - a.threshold);
    return r;
  }
  throw ContractError("compute_eer: no crossing found");  // unreachable for a valid set
}

DcfResult compute_min_dcf(const ScoreSet& s, const DcfParams& p) {
  p.validate();
  const auto pts = sweep(s);
  const double nt = static_cast<double>(s.n_target()), nn = static_cast<double>(s.n_nontarget());
  const double norm = std::min(p.c_miss * p.p_target, p.c_fa * (1.0 - p.p_target));
  DcfResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& pt : pts) {
    const double dcf = p.c_miss * p.p_target * (static_cast<double>(pt.misses) / nt) +
                       p.c_fa * (1.0 - p.p_target) * (static_cast<double>(pt.false_alarms) / nn);
    if (dcf < best.min_dcf) best = {dcf, pt.threshold};
  }
  best.min_dcf /= norm;
  return best;
}

std::vector<Trial> all_pair_trials(const CorpusManifest& manifest) {
  std::vector<Trial> trials;
  const auto& e = manifest.entries;
  for (std::size_t a = 0; a < e.size(); ++a)
    for (std::size_t b = a + 1; b < e.size(); ++b)
      trials.push_back({e[a].path, e[b].path, e[a].speaker_id == e[b].speaker_id});
  return trials;
}

void write_trials(const std::filesystem::path& path, const std::vector<Trial>& trials) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  for (const auto& t : trials) os << (t.target ? 1 : 0) << ' ' << t.enroll << ' ' << t.test << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<Trial> read_trials(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::vector<Trial> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string label, extra;
    Trial t;
    if (!(ls >> label >> t.enroll >> t.test) || (ls >> extra) || (label != "0" && label != "1"))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected '<0|1> <enroll> <test>'");
    t.target = label == "1";
    out.push_back(std::move(t));
  }
  return out;
}

Eigen::MatrixXd embed_corpus(const Encoder& encoder, const Corpus& corpus, const FeatureConfig& features) {
  const FeatureExtractor extractor(features);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(corpus.size()), encoder.config().embedding_dim);
  parallel_for(corpus.size(), [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = encoder.encode(extractor.log_mel(corpus.audio[i])).transpose();
  });
  return out;
}

ScoreSet score_trials(const Eigen::MatrixXd& embeddings, const CorpusManifest& manifest,
                      const std::vector<Trial>& trials) {
  std::vector<std::pair<int, int>> idx;
  idx.reserve(trials.size());
  for (const auto& t : trials) {
    const int a = manifest.find_path(t.enroll), b = manifest.find_path(t.test);
    if (a < 0) throw ManifestError("trial utterance not in manifest: " + t.enroll);
    if (b < 0) throw ManifestError("trial utterance not in manifest: " + t.test);
    idx.emplace_back(a, b);
  }
  Eigen::MatrixXd z = embeddings;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double nrm = z.row(r).norm();
    if (nrm == 0.0 || !std::isfinite(nrm)) throw DegenerateInputError("embedding with zero or non-finite norm");
    z.row(r) /= nrm;
  }
  ScoreSet s;
  for (std::size_t k = 0; k < trials.size(); ++k) {
    s.scores.push_back(std::clamp(z.row(idx[k].first).dot(z.row(idx[k].second)), -1.0, 1.0));
    s.labels.push_back(trials[k].target ? 1 : 0);
  }
  return s;
}

ScoreSet score_trials(const Encoder& encoder, const Corpus& corpus, const std::vector<Trial>& trials,
                      const FeatureConfig& features) {
  for (const auto& t : trials)
    for (const auto* p : {&t.enroll, &t.test})
      if (corpus.manifest.find_path(*p) < 0) throw ManifestError("trial utterance not in manifest: " + *p);
  return score_trials(embed_corpus(encoder, corpus, features), corpus.manifest, trials);
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

void write_scores(const std::filesystem::path& path, const ScoreSet& s) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < s.size(); ++i) os << shortest(s.scores[i]) << ' ' << int(s.labels[i]) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

ScoreSet read_scores(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  ScoreSet s;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string score;
    int label = -1;
    double v = 0.0;
    if (!(ls >> score >> label) || (label != 0 && label != 1) ||
        std::from_chars(score.data(), score.data() + score.size(), v).ec != std::errc())
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected '<score> <0|1>'");
    s.scores.push_back(v);
    s.labels.push_back(static_cast<std::uint8_t>(label));
  }
  return s;
}

EvalResults evaluate_scores(const ScoreSet& s, const DcfParams& p) {
  EvalResults r;
  r.eer = compute_eer(s).eer;
  r.min_dcf = compute_min_dcf(s, p).min_dcf;
  r.n_trials = s.size();
  return r;
}

void write_results_json(const std::filesystem::path& path, const EvalResults& r) {
  nlohmann::ordered_json j;
  j["eer"] = r.eer;
  j["min_dcf"] = r.min_dcf;
  j["n_trials"] = r.n_trials;
  j["config_hash"] = r.config_hash;
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

EvalResults read_results_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(is);
    EvalResults r;
    r.eer = j.at("eer").get<double>();
    r.min_dcf = j.at("min_dcf").get<double>();
    r.n_trials = j.at("n_trials").get<std::size_t>();
    if (j.contains("config_hash")) r.config_hash = j["config_hash"].get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace ssk
