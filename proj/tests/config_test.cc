// tests/config_test.cc

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

#include <string>

#include "doctest.h"
#include "ssk/config.h"
#include "ssk/error.h"

namespace ssk {
namespace {

std::string error_of(const std::string& text) {
  try {
    parse_experiment_config(text, "t.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST_SUITE("config") {

TEST_CASE("defaults and the desk config") {
  const ExperimentConfig d = parse_experiment_config("config_version: 1\n");
  CHECK(d.trainer.batch_size == 64);
  CHECK(d.trainer.loss.variant == LossVariant::wacsg);
  CHECK(d.trainer.loss.tau == 1.0);
  CHECK(d.encoder.embedding_dim == 192);
  CHECK(d.ablation.seeds == std::vector<std::uint64_t>{1, 2, 3});

  const ExperimentConfig desk = load_experiment_config(std::string(SSK_SOURCE_DIR) + "/configs/desk.yaml");
  CHECK(desk.corpus.synth.n_speakers == 64);
  CHECK(desk.corpus.synth.utts_per_speaker == 20);
  CHECK(desk.trainer.epochs == 20);
  CHECK(desk.trainer.precision == Precision::f32);
  CHECK(desk.encoder.convs.size() == 3);
  CHECK(desk.encoder_config().seed == desk.seed);
  CHECK(desk.train_config().seed == desk.seed);
}

TEST_CASE("strict parsing reports the location") {
  const std::string unknown = error_of("config_version: 1\ntrainer:\n  epochs: 3\n  epoch: 4\n");
  CHECK(unknown.find("t.yaml:4:3") != std::string::npos);
  CHECK(unknown.find("'epoch'") != std::string::npos);

  const std::string type = error_of("config_version: 1\nloss:\n  tau: warm\n");
  CHECK(type.find("t.yaml:3:8") != std::string::npos);
  CHECK(type.find("tau") != std::string::npos);

  CHECK(error_of("seed: 1\n").find("config_version") != std::string::npos);
  CHECK(error_of("config_version: 2\n").find("unsupported") != std::string::npos);
  CHECK(error_of("config_version: 1\nloss:\n  variant: triplet\n").find("t.yaml:") == 0);
  CHECK(error_of("config_version: 1\nloss:\n  tau: 0\n") != "");
  CHECK(error_of("config_version: 1\naugmentation:\n  choices: [thunder]\n").find("t.yaml:3") == 0);
  CHECK(error_of("config_version: 1\nencoder:\n  convs:\n    - {channels: 8, kernel: 4, dilation: 1}\n") != "");
  CHECK(error_of("config_version: 1\nencoder:\n  convs:\n    - {channels: 8, kernal: 3}\n").find("kernal") !=
        std::string::npos);
  CHECK(error_of("config_version: 1\nablation:\n  seeds: []\n") != "");
  CHECK(error_of("config_version: 1\ntrainer: [1, 2]\n").find("mapping") != std::string::npos);
  CHECK(error_of("config_version: 1\n  bad: : indentation\n").find("t.yaml:") == 0);
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/x.yaml"), ConfigError);
}

TEST_CASE("canonical yaml round trip and hash") {
  ExperimentConfig c = parse_experiment_config(
      "config_version: 1\nseed: 9\nloss:\n  variant: wcsl\n  tau: 0.07\n  negative_mode: all_other_utterances\n"
      "trainer:\n  precision: float32\n  lr0: 0.1\nablation:\n  seeds: [4, 5]\n");
  const std::string y = to_yaml(c);
  const ExperimentConfig back = parse_experiment_config(y);
  CHECK(to_yaml(back) == y);
  CHECK(back.trainer.loss.tau == 0.07);
  CHECK(back.trainer.loss.variant == LossVariant::wcsl);
  CHECK(back.ablation.seeds == std::vector<std::uint64_t>{4, 5});
  const std::string h = config_hash(c);
  CHECK(h.size() == 16);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(config_hash(back) == h);
  c.seed = 10;
  CHECK(config_hash(c) != h);
}

TEST_CASE("relative paths resolve against the config directory") {
  const auto c = parse_experiment_config("config_version: 1\ncorpus:\n  path: data/train\n", "x", "/base");
  REQUIRE(c.corpus.path);
  CHECK(*c.corpus.path == std::filesystem::path("/base/data/train"));
}

}  // TEST_SUITE

}  // namespace
}  // namespace ssk
