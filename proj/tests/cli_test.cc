// tests/cli_test.cc

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

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <string>

#include <json.hpp>

#include "doctest.h"
#include "test_util.h"

namespace ssk {
namespace {

struct Result {
  int status = -1;
  std::string output;
};

Result run(const test::TempDir& d, const std::string& args) {
  const auto log = d / "cli.log";
  const std::string cmd = std::string("'") + SSK_CLI + "' " + args + " > '" + log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  Result r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.output = test::slurp(log);
  return r;
}

// Small enough for a few seconds of work.
const char* kTiny =
    "config_version: 1\n"
    "corpus: {n_speakers: 3, utts_per_speaker: 2, duration_s: 4.0}\n"
    "eval_corpus: {n_speakers: 2, utts_per_speaker: 2, duration_s: 4.0}\n"
    "assets: {noises_per_kind: 1, noise_duration_s: 2.0, n_rirs: 2}\n";

TEST_SUITE("cli") {

TEST_CASE("usage and configuration errors exit with status 2") {
  test::TempDir d("cli");
  CHECK(run(d, "--help").status == 0);
  const Result help = run(d, "train --help");
  CHECK(help.status == 0);
  CHECK(help.output.find("--config") != std::string::npos);
  CHECK(run(d, "").status == 2);
  CHECK(run(d, "frobnicate").status == 2);
  CHECK(run(d, "train").status == 2);

  test::spit(d / "bad.yaml", "config_version: 1\ntrainer:\n  batch_sz: 4\n");
  const Result bad = run(d, "train --config '" + (d / "bad.yaml").string() + "'");
  CHECK(bad.status == 2);
  CHECK(bad.output.find("batch_sz") != std::string::npos);
  CHECK(bad.output.find(":3:3") != std::string::npos);
}

TEST_CASE("gradcheck passes") {
  test::TempDir d("cli");
  test::spit(d / "c.yaml", "config_version: 1\n");
  const Result r = run(d, "gradcheck --config '" + (d / "c.yaml").string() + "' --out '" + (d / "g").string() + "'");
  CHECK(r.status == 0);
  CHECK(r.output.find("all gradient checks passed") != std::string::npos);
  const auto j = nlohmann::json::parse(test::slurp(d / "g/gradcheck.json"));
  CHECK(j.size() > 16);
  for (const auto& c : j) CHECK(c["passed"].get<bool>());
}

TEST_CASE("synth-corpus and augment-preview write their artifacts") {
  test::TempDir d("cli");
  test::spit(d / "c.yaml", kTiny);
  const std::string cfg = " --config '" + (d / "c.yaml").string() + "'";
  const Result s = run(d, "synth-corpus" + cfg + " --out '" + (d / "s").string() + "'");
  REQUIRE(s.status == 0);
  CHECK(std::filesystem::exists(d / "s/corpus/manifest.tsv"));
  CHECK(std::filesystem::exists(d / "s/eval_corpus/trials.txt"));
  CHECK(std::filesystem::exists(d / "s/config.yaml"));
  const auto j = nlohmann::json::parse(test::slurp(d / "s/summary.json"));
  CHECK(j["train_utterances"] == 6);
  CHECK(j["eval_utterances"] == 4);

  const Result p = run(d, "augment-preview" + cfg + " --count 2 --out '" + (d / "p").string() + "'");
  REQUIRE(p.status == 0);
  const auto pj = nlohmann::json::parse(test::slurp(d / "p/preview.json"));
  REQUIRE(pj.size() == 2);
  const std::string id = pj[0]["utterance"];
  CHECK(std::filesystem::exists(d / ("p/" + id + "_clean.wav")));
  CHECK(std::filesystem::exists(d / ("p/" + id + "_noisy_logmel.csv")));

  const Result e = run(d, "evaluate" + cfg + " --out '" + (d / "e").string() + "'");
  CHECK(e.status == 0);
  CHECK(std::filesystem::exists(d / "e/results.json"));
}

TEST_CASE("evaluate after train keeps the training history") {
  test::TempDir d("cli");
  test::spit(d / "c.yaml", std::string(kTiny) + "trainer: {batch_size: 2, epochs: 1}\n");
  const std::string cfg = " --config '" + (d / "c.yaml").string() + "' --out '" + (d / "t").string() + "'";
  REQUIRE(run(d, "train" + cfg).status == 0);
  const std::string history = test::slurp(d / "t/history.csv");
  CHECK(std::count(history.begin(), history.end(), '\n') == 2);
  REQUIRE(run(d, "evaluate" + cfg + " --checkpoint '" + (d / "t/checkpoint.ckpt").string() + "'").status == 0);
  CHECK(test::slurp(d / "t/history.csv") == history);
  CHECK(test::slurp(d / "t/report.md").find("## History") != std::string::npos);
}

}  // TEST_SUITE

}  // namespace
}  // namespace ssk
