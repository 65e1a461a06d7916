// src/experiment.cc

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

#include "ssk/experiment.h"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "ssk/error.h"
#include "ssk/parallel.h"

namespace ssk {

Corpus make_eval_corpus(const ExperimentConfig& cfg) {
  Corpus c = cfg.eval_corpus.path ? load_corpus(*cfg.eval_corpus.path) : synth_corpus(cfg.eval_corpus.synth);
  if (!cfg.eval_corpus.augment_test) return c;
  // Independent of the training bank: different seed, same recipe.
  const AssetBank assets = synth_assets(derive_seed(cfg.assets.seed, "eval"), kSampleRate, cfg.assets.synth);
  parallel_for(c.size(), [&](std::size_t i) {
    Rng rng(derive_seed(cfg.eval_corpus.augment_seed, c.manifest.entries[i].utterance_id));
    c.audio[i] = apply_policy(c.audio[i], cfg.augmentation, assets, rng);
  });
  return c;
}

Workspace prepare_workspace(const ExperimentConfig& cfg) {
  cfg.validate();
  Workspace ws;
  ws.train = cfg.corpus.path ? load_corpus(*cfg.corpus.path) : synth_corpus(cfg.corpus.synth);
  ws.train_assets = cfg.assets.path ? load_assets(*cfg.assets.path)
                                    : synth_assets(cfg.assets.seed, kSampleRate, cfg.assets.synth);
  ws.eval = make_eval_corpus(cfg);
  for (const auto& e : ws.eval.manifest.entries)
    for (const auto& t : ws.train.manifest.entries)
      if (e.speaker_id == t.speaker_id)
        throw ConfigError("evaluation speaker " + std::to_string(e.speaker_id) + " also appears in training");
  ws.trials = all_pair_trials(ws.eval.manifest);
  return ws;
}

TrainData train_data(const ExperimentConfig& cfg, const Workspace& ws) {
  TrainData d;
  d.corpus = &ws.train;
  d.policy = cfg.augmentation;
  d.assets = &ws.train_assets;
  d.features = cfg.features;
  return d;
}

EvalResults evaluate_encoder(const Encoder& encoder, const ExperimentConfig& cfg, const Workspace& ws,
                             ScoreSet* scores) {
  ScoreSet s = score_trials(encoder, ws.eval, ws.trials, cfg.features);
  EvalResults r = evaluate_scores(s, cfg.eval);
  r.config_hash = config_hash(cfg);
  if (scores) *scores = std::move(s);
  return r;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string history_table(const TrainHistory& h) {
  std::string s = "| epoch | mean loss | lr |\n|---:|---:|---:|\n";
  for (const auto& e : h.epochs)
    s += "| " + std::to_string(e.epoch) + " | " + fmt("%.6f", e.mean_loss) + " | " + fmt("%.6g", e.lr) + " |\n";
  return s;
}

}  // namespace

void emit_report(const TrainHistory& history, const EvalResults& results, const ExperimentConfig& cfg,
                 const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  if (!history.epochs.empty()) write_history_csv(out_dir / "history.csv", history);
  EvalResults r = results;
  r.config_hash = config_hash(cfg);
  write_results_json(out_dir / "results.json", r);
  std::string md = "# Training report\n\nConfig hash: `" + r.config_hash + "`\n\n";
  md += "| metric | value |\n|---|---:|\n";
  md += "| EER (%) | " + fmt("%.2f", 100.0 * r.eer) + " |\n";
  md += "| minDCF (p=" + fmt("%g", cfg.eval.p_target) + ") | " + fmt("%.4f", r.min_dcf) + " |\n";
  md += "| trials | " + std::to_string(r.n_trials) + " |\n\n";
  if (!history.epochs.empty()) md += "## History\n\n" + history_table(history) + "\n";
  md += "## Config\n\n```yaml\n" + to_yaml(cfg) + "```\n";
  write_text(out_dir / "report.md", md);
}

const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> v{
      {"W-ACSG", LossVariant::wacsg},
      {"w/o weighting (ACSG)", LossVariant::acsg},
      {"w/o clean segments (W-CSL)", LossVariant::wcsl},
      {"w/o both (CSL)", LossVariant::csl},
  };
  return v;
}

AblationReport ablate(const ExperimentConfig& cfg, const Workspace& ws, const ProgressFn& progress) {
  cfg.validate();
  AblationReport rep;
  rep.config_hash = config_hash(cfg);
  const TrainData data = train_data(cfg, ws);
  const auto& variants = ablation_variants();

  {
    const EvalResults r = evaluate_encoder(Encoder::init(cfg.encoder_config()), cfg, ws);
    rep.untrained_eer_percent = 100.0 * r.eer;
    rep.untrained_min_dcf = r.min_dcf;
    if (progress) progress("untrained encoder: EER " + fmt("%.2f", rep.untrained_eer_percent) + "%");
  }

  for (std::uint64_t seed : cfg.ablation.seeds) {
    ExperimentConfig seeded = cfg;
    seeded.seed = seed;
    std::vector<std::pair<std::string, TrainConfig>> runs;
    for (const auto& v : variants) {
      TrainConfig t = seeded.train_config();
      t.loss.variant = v.variant;
      runs.emplace_back(to_string(v.variant), t);
    }
    TrainOptions opts;
    if (progress)
      opts.on_epoch = [&](const std::string& name, const EpochRecord& e) {
        progress("seed " + std::to_string(seed) + " " + name + " epoch " + std::to_string(e.epoch) + " loss " +
                 fmt("%.5f", e.mean_loss));
      };
    auto trained = train_lockstep(runs, Encoder::init(seeded.encoder_config()), data, opts);
    for (std::size_t k = 0; k < trained.size(); ++k) {
      AblationRun run;
      run.name = variants[k].name;
      run.variant = variants[k].variant;
      run.seed = seed;
      run.history = trained[k].history;
      run.train_seconds = trained[k].seconds;
      run.results = evaluate_encoder(trained[k].encoder, cfg, ws);
      if (progress)
        progress("seed " + std::to_string(seed) + " " + run.name + ": EER " + fmt("%.2f", 100.0 * run.results.eer) +
                 "%, minDCF " + fmt("%.4f", run.results.min_dcf));
      rep.runs.push_back(std::move(run));
    }
  }
  for (const auto& v : variants) {
    AblationRow row{v.name, v.variant, 0.0, 0.0};
    int count = 0;
    for (const auto& r : rep.runs)
      if (r.variant == v.variant) {
        row.eer_percent += 100.0 * r.results.eer;
        row.min_dcf += r.results.min_dcf;
        ++count;
      }
    row.eer_percent /= count;
    row.min_dcf /= count;
    rep.rows.push_back(row);
  }
  return rep;
}

void write_ablation(const AblationReport& rep, const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  std::string csv = "variant,loss,eer_percent,min_dcf\n";
  for (const auto& r : rep.rows)
    csv += r.name + ',' + to_string(r.variant) + ',' + fmt("%.4f", r.eer_percent) + ',' + fmt("%.6f", r.min_dcf) + '\n';
  write_text(out_dir / "ablation.csv", csv);

  nlohmann::ordered_json j;
  j["config_hash"] = rep.config_hash;
  j["untrained"] = {{"eer_percent", rep.untrained_eer_percent}, {"min_dcf", rep.untrained_min_dcf}};
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rep.rows)
    j["rows"].push_back({{"variant", r.name}, {"loss", to_string(r.variant)}, {"eer_percent", r.eer_percent},
                         {"min_dcf", r.min_dcf}});
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : rep.runs) {
    const std::string file = "history_" + to_string(r.variant) + "_seed" + std::to_string(r.seed) + ".csv";
    write_history_csv(out_dir / file, r.history);
    j["runs"].push_back({{"variant", r.name},
                         {"loss", to_string(r.variant)},
                         {"seed", r.seed},
                         {"eer_percent", 100.0 * r.results.eer},
                         {"min_dcf", r.results.min_dcf},
                         {"n_trials", r.results.n_trials},
                         {"first_epoch_loss", r.history.epochs.front().mean_loss},
                         {"last_epoch_loss", r.history.epochs.back().mean_loss},
                         {"train_seconds", r.train_seconds},
                         {"history", file}});
  }
  write_text(out_dir / "ablation.json", j.dump(2) + "\n");

  std::string md = "# Ablation\n\nConfig hash: `" + rep.config_hash + "`\n\n";
  md += "Mean over seeds";
  for (std::size_t i = 0; i < cfg.ablation.seeds.size(); ++i)
    md += (i ? ", " : " ") + std::to_string(cfg.ablation.seeds[i]);
  md += ".\n\n| variant | EER (%) | minDCF |\n|---|---:|---:|\n";
  for (const auto& r : rep.rows) md += "| " + r.name + " | " + fmt("%.2f", r.eer_percent) + " | " + fmt("%.4f", r.min_dcf) + " |\n";
  md += "| untrained encoder | " + fmt("%.2f", rep.untrained_eer_percent) + " | " + fmt("%.4f", rep.untrained_min_dcf) + " |\n\n";
  md += "## Runs\n\n| variant | seed | epoch-1 loss | last-epoch loss | ratio | EER (%) | minDCF |\n|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& r : rep.runs) {
    const double first = r.history.epochs.front().mean_loss, last = r.history.epochs.back().mean_loss;
    md += "| " + r.name + " | " + std::to_string(r.seed) + " | " + fmt("%.4f", first) + " | " + fmt("%.4f", last) +
          " | " + fmt("%.3f", last / first) + " | " + fmt("%.2f", 100.0 * r.results.eer) + " | " +
          fmt("%.4f", r.results.min_dcf) + " |\n";
  }
  md += "\n## Config\n\n```yaml\n" + to_yaml(cfg) + "```\n";
  write_text(out_dir / "report.md", md);
}

EmbeddingBatch random_batch(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingBatch b;
  b.noisy.resize(2 * n, dim);
  b.clean.resize(n, dim);
  for (int r = 0; r < 2 * n; ++r)
    for (int c = 0; c < dim; ++c) b.noisy(r, c) = rng.normal();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < dim; ++c) b.clean(r, c) = rng.normal();
  return b;
}

std::vector<GradcheckResult> run_gradcheck(const ExperimentConfig& cfg) {
  const auto& g = cfg.gradcheck;
  const EmbeddingBatch batch = random_batch(g.n, g.dim, g.seed);
  const Encoder enc = Encoder::init(g.encoder);
  Tensor<double> x({3 * g.n, g.frames, g.encoder.input_dim});
  Rng rng(derive_seed(g.seed, "gradcheck/input"));
  for (auto& v : x.data) v = rng.normal();

  std::vector<int> noisy_rows, clean_rows;
  for (int r = 0; r < 2 * g.n; ++r) noisy_rows.push_back(r);
  for (int r = 0; r < g.n; ++r) clean_rows.push_back(2 * g.n + r);

  std::vector<GradcheckResult> out;
  for (auto variant : {LossVariant::csl, LossVariant::acsg, LossVariant::wacsg, LossVariant::wcsl})
    for (auto mode : {NegativeMode::literal, NegativeMode::all_other_utterances})
      for (bool detach : {true, false})
        for (bool tau_in_beta : {true, false})
          for (double tau : {1.0, 0.5}) {
            // Flags that cannot change an unweighted loss are skipped for it.
            if (!uses_weights(variant) && (!detach || !tau_in_beta)) continue;
            LossConfig lc = cfg.trainer.loss;
            lc.variant = variant;
            lc.negative_mode = mode;
            lc.detach_weights = detach;
            lc.include_clean_anchor_tau_in_beta = tau_in_beta;
            lc.tau = tau;
            std::string label = to_string(variant) + " " + to_string(mode) + " tau=" + fmt("%g", tau);
            if (uses_weights(variant))
              label += std::string(detach ? " detach" : " flow") + (tau_in_beta ? " tau-in-beta" : " raw-beta");

            const auto emb = loss_gradient_check(batch, lc, g.eps);
            out.push_back({"embeddings " + label, emb.max_rel_error, emb.coordinates, emb.max_rel_error <= g.tolerance});

            auto graph = [&]<class T>(Tape<T>& tape) {
              const auto params = enc.bind(tape);
              const auto e = enc.forward<T>(tape, params, tape.constant(tensor_cast<T>(x)));
              Var<T> clean;
              if (uses_clean(variant)) clean = ad::gather_rows(e, clean_rows);
              return std::make_pair(params, build_loss(ad::gather_rows(e, noisy_rows), clean, lc).total);
            };
            Tape<double> tape;
            const auto [params, total] = graph(tape);
            const auto analytic = tape.gradient(total, params);
            Tape<long double> ref;
            const auto [ref_params, ref_total] = graph(ref);
            const auto par = compare_gradients(analytic, numeric_gradient<long double>(ref, ref_total, ref_params, g.eps));
            out.push_back({"encoder " + label, par.max_rel_error, par.coordinates, par.max_rel_error <= g.tolerance});
          }
  return out;
}

}  // namespace ssk
