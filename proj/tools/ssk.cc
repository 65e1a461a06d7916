// tools/ssk.cc

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

// Command-line driver: ssk <subcommand> --config <path> [--out <dir>] [--seed <u64>]
//
// Exit status: 0 success, 1 failure (including a failed gradient check),
// 2 configuration or usage error, 3 non-finite values during training.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssk/config.h"
#include "ssk/error.h"
#include "ssk/experiment.h"

namespace {

using namespace ssk;

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  int preview_count = 4;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = load_experiment_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void log(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

void write_config_echo(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  std::ofstream os(out / "config.yaml");
  os << to_yaml(cfg);
  if (!os) throw IoError("cannot write " + (out / "config.yaml").string());
}

int cmd_synth_corpus(const Options& o) {
  const auto cfg = load(o);
  const std::filesystem::path out(o.out);
  std::filesystem::create_directories(out);
  const Corpus train = synth_corpus(cfg.corpus.synth);
  write_corpus(train, out / "corpus");
  const Corpus eval = make_eval_corpus(cfg);
  write_corpus(eval, out / "eval_corpus");
  write_assets(synth_assets(cfg.assets.seed, kSampleRate, cfg.assets.synth), out / "assets");
  write_trials(out / "eval_corpus" / "trials.txt", all_pair_trials(eval.manifest));
  write_config_echo(cfg, out);
  nlohmann::ordered_json j{{"train_utterances", train.size()},
                           {"eval_utterances", eval.size()},
                           {"config_hash", config_hash(cfg)}};
  std::ofstream(out / "summary.json") << j.dump(2) << '\n';
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const auto cfg = load(o);
  const std::filesystem::path out(o.out);
  std::filesystem::create_directories(out);
  log("preparing data");
  const Workspace ws = prepare_workspace(cfg);
  TrainOptions opts;
  opts.checkpoint_dir = out;
  opts.on_epoch = [](const std::string&, const EpochRecord& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %d  loss %.6f  lr %.6g", e.epoch, e.mean_loss, e.lr);
    log(buf);
  };
  const TrainRun run = train(cfg.train_config(), Encoder::init(cfg.encoder_config()), train_data(cfg, ws), opts);
  ScoreSet scores;
  const EvalResults r = evaluate_encoder(run.encoder, cfg, ws, &scores);
  write_scores(out / "scores.txt", scores);
  emit_report(run.history, r, cfg, out);
  write_config_echo(cfg, out);
  std::printf("{\"eer\": %.6f, \"min_dcf\": %.6f, \"n_trials\": %zu, \"train_seconds\": %.1f}\n", r.eer, r.min_dcf,
              r.n_trials, run.seconds);
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto cfg = load(o);
  const std::filesystem::path out(o.out);
  std::filesystem::create_directories(out);
  const Encoder enc = o.checkpoint.empty() ? Encoder::init(cfg.encoder_config()) : Encoder::load(o.checkpoint);
  if (o.checkpoint.empty()) log("no --checkpoint given; scoring an untrained encoder");
  Workspace ws;
  ws.eval = make_eval_corpus(cfg);
  ws.trials = all_pair_trials(ws.eval.manifest);
  ScoreSet scores;
  const EvalResults r = evaluate_encoder(enc, cfg, ws, &scores);
  write_scores(out / "scores.txt", scores);
  // Keep the training history when evaluating into a train output dir.
  const TrainHistory h = std::filesystem::exists(out / "history.csv") ? read_history_csv(out / "history.csv")
                                                                       : TrainHistory{};
  emit_report(h, r, cfg, out);
  std::printf("{\"eer\": %.6f, \"min_dcf\": %.6f, \"n_trials\": %zu}\n", r.eer, r.min_dcf, r.n_trials);
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const auto cfg = load(o);
  const std::filesystem::path out(o.out);
  std::filesystem::create_directories(out);
  const auto results = run_gradcheck(cfg);
  bool ok = true;
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    std::printf("%-60s max_rel_error %.3e  %s\n", r.label.c_str(), r.max_rel_error, r.passed ? "ok" : "FAIL");
    j.push_back({{"check", r.label}, {"max_rel_error", r.max_rel_error}, {"coordinates", r.coordinates},
                 {"passed", r.passed}});
    ok = ok && r.passed;
  }
  std::ofstream(out / "gradcheck.json") << j.dump(2) << '\n';
  std::printf("%s (tolerance %g)\n", ok ? "all gradient checks passed" : "gradient check FAILED", cfg.gradcheck.tolerance);
  return ok ? 0 : 1;
}

int cmd_ablate(const Options& o) {
  const auto cfg = load(o);
  const std::filesystem::path out(o.out);
  std::filesystem::create_directories(out);
  log("preparing data");
  const Workspace ws = prepare_workspace(cfg);
  const AblationReport rep = ablate(cfg, ws, log);
  write_ablation(rep, cfg, out);
  write_config_echo(cfg, out);
  for (const auto& r : rep.rows) std::printf("%-30s EER %6.2f%%  minDCF %.4f\n", r.name.c_str(), r.eer_percent, r.min_dcf);
  return 0;
}

int cmd_augment_preview(const Options& o) {
  const auto cfg = load(o);
  const std::filesystem::path out(o.out);
  std::filesystem::create_directories(out);
  const Corpus corpus = cfg.corpus.path ? load_corpus(*cfg.corpus.path) : synth_corpus(cfg.corpus.synth);
  const AssetBank assets =
      cfg.assets.path ? load_assets(*cfg.assets.path) : synth_assets(cfg.assets.seed, kSampleRate, cfg.assets.synth);
  const FeatureExtractor extractor(cfg.features);
  Rng rng(derive_seed(cfg.seed, "augment-preview"));
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  const int count = std::min<int>(o.preview_count, static_cast<int>(corpus.size()));
  for (int k = 0; k < count; ++k) {
    const auto u = rng.uniform_int(corpus.size());
    const auto& id = corpus.manifest.entries[u].utterance_id;
    auto [first, second] = crop_two_nonoverlapping(corpus.audio[u], cfg.trainer.segment_len_s, rng);
    AugmentRecord rec;
    const Waveform noisy = apply_policy(first, cfg.augmentation, assets, rng, &rec);
    write_wav(out / (id + "_clean.wav"), first);
    write_wav(out / (id + "_noisy.wav"), noisy);
    write_feature_csv(out / (id + "_noisy_logmel.csv"), extractor.log_mel(noisy));
    nlohmann::ordered_json r{{"utterance", id}, {"augmentation", to_string(rec.choice)}};
    if (rec.snr_db) r["snr_db"] = *rec.snr_db;
    if (rec.noise_index) r["noise_index"] = *rec.noise_index;
    if (rec.rir_index) r["rir_index"] = *rec.rir_index;
    j.push_back(r);
  }
  std::ofstream(out / "preview.json") << j.dump(2) << '\n';
  std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive speaker-embedding toolkit"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "Override the experiment seed");
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Options&);
  };
  const Cmd cmds[] = {
      {"synth-corpus", "Synthesize training and evaluation corpora and augmentation assets", cmd_synth_corpus},
      {"train", "Train an encoder, evaluate it and write a report", cmd_train},
      {"evaluate", "Score the held-out trials with a checkpoint", cmd_evaluate},
      {"gradcheck", "Finite-difference check of every loss variant and the encoder", cmd_gradcheck},
      {"ablate", "Train and evaluate the four loss variants over the configured seeds", cmd_ablate},
      {"augment-preview", "Write clean and augmented segments for listening", cmd_augment_preview},
  };
  int (*selected)(const Options&) = nullptr;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (std::string(c.name) == "evaluate") sub->add_option("--checkpoint", o.checkpoint, "Encoder checkpoint");
    if (std::string(c.name) == "augment-preview")
      sub->add_option("--count", o.preview_count, "Number of segments")->capture_default_str();
    sub->callback([&selected, fn = c.fn] { selected = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    return selected(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
