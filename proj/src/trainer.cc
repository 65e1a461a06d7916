// src/trainer.cc

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

#include "ssk/trainer.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "ssk/error.h"
#include "ssk/parallel.h"

namespace ssk {

std::string to_string(Precision p) { return p == Precision::f32 ? "float32" : "float64"; }

Precision parse_precision(const std::string& name) {
  if (name == "float32") return Precision::f32;
  if (name == "float64") return Precision::f64;
  throw ConfigError("unknown precision '" + name + "' (expected float32 or float64)");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("trainer: batch_size must be at least 2");
  if (epochs < 1) throw ConfigError("trainer: epochs must be at least 1");
  if (!(segment_len_s > 0)) throw ConfigError("trainer: segment_len_s must be positive");
  if (!(lr0 > 0)) throw ConfigError("trainer: lr0 must be positive");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw ConfigError("trainer: lr_decay must be in (0, 1]");
  if (decay_every < 1) throw ConfigError("trainer: decay_every must be at least 1");
  loss.validate();
}

double lr_at(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw ContractError("lr_at: negative epoch");
  return config.lr0 * std::pow(config.lr_decay, epoch / config.decay_every);
}

double lr_at(int epoch) { return lr_at(TrainConfig{}, epoch); }

void adam_step(AdamState& s, std::vector<NamedTensor>& params, const std::vector<Tensor<double>>& grads,
               double lr) {
  if (grads.size() != params.size())
    throw ContractError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (grads[k].shape != params[k].value.shape)
      throw ContractError("adam_step: gradient shape " + grads[k].shape_string() + " does not match " +
                          params[k].name + " " + params[k].value.shape_string());
  if (s.m.empty()) {
    for (const auto& p : params) {
      s.m.emplace_back(p.value.size(), 0.0);
      s.v.emplace_back(p.value.size(), 0.0);
    }
  }
  if (s.m.size() != params.size()) throw ContractError("adam_step: optimizer state does not match parameters");
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].value.data;
    const auto& g = grads[k].data;
    auto& m = s.m[k];
    auto& v = s.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.eps);
    }
  }
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, int line) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw FormatError("history line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::string format_history_csv(const TrainHistory& h) {
  std::string out = "epoch,mean_loss,lr,seconds,val_eer\n";
  for (const auto& e : h.epochs) {
    out += std::to_string(e.epoch) + ',' + shortest(e.mean_loss) + ',' + shortest(e.lr) + ',' +
           shortest(e.seconds) + ',';
    if (e.val_eer) out += shortest(*e.val_eer);
    out += '\n';
  }
  return out;
}

TrainHistory parse_history_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "epoch,mean_loss,lr,seconds,val_eer")
    throw FormatError("history: missing or unexpected header");
  TrainHistory h;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 5) throw FormatError("history line " + std::to_string(lineno) + ": expected 5 fields");
    EpochRecord e;
    e.epoch = static_cast<int>(parse_double(f[0], lineno));
    e.mean_loss = parse_double(f[1], lineno);
    e.lr = parse_double(f[2], lineno);
    e.seconds = parse_double(f[3], lineno);
    if (!f[4].empty()) e.val_eer = parse_double(f[4], lineno);
    h.epochs.push_back(e);
  }
  return h;
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << format_history_csv(history);
  if (!os) throw IoError("failed writing " + path.string());
}

TrainHistory read_history_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_history_csv(ss.str());
}

Batch assemble_batch(const TrainData& data, const FeatureExtractor& extractor, int n,
                     double segment_len_s, Rng& rng, bool with_clean) {
  if (!data.corpus || !data.assets) throw ContractError("assemble_batch: corpus and assets are required");
  if (n < 2) throw ConfigError("batch size must be at least 2");
  const Corpus& corpus = *data.corpus;
  std::map<int, std::vector<std::size_t>> by_speaker;
  for (std::size_t u = 0; u < corpus.manifest.entries.size(); ++u)
    by_speaker[corpus.manifest.entries[u].speaker_id].push_back(u);
  if (static_cast<int>(by_speaker.size()) < n)
    throw ConfigError("batch of " + std::to_string(n) + " needs as many distinct speakers; corpus has " +
                      std::to_string(by_speaker.size()));
  std::vector<int> speakers;
  for (const auto& kv : by_speaker) speakers.push_back(kv.first);

  Batch b;
  for (int i = 0; i < n; ++i) {
    const auto pick = static_cast<std::size_t>(i) + rng.uniform_int(speakers.size() - static_cast<std::size_t>(i));
    std::swap(speakers[static_cast<std::size_t>(i)], speakers[pick]);
    const auto& utts = by_speaker[speakers[static_cast<std::size_t>(i)]];
    b.speakers.push_back(speakers[static_cast<std::size_t>(i)]);
    b.utterances.push_back(utts[rng.uniform_int(utts.size())]);
  }
  std::vector<std::uint64_t> item_seeds(static_cast<std::size_t>(n));
  for (auto& s : item_seeds) s = rng.next_u64();

  b.noisy.resize(2 * static_cast<std::size_t>(n));
  b.augmentations.resize(2 * static_cast<std::size_t>(n));
  if (with_clean) b.clean.resize(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    Rng item(item_seeds[i]);
    const Waveform& u = corpus.audio[b.utterances[i]];
    auto [first, second] = crop_two_nonoverlapping(u, segment_len_s, item);
    if (with_clean) b.clean[i] = extractor.log_mel(first);
    b.noisy[2 * i] = extractor.log_mel(apply_policy(first, data.policy, *data.assets, item, &b.augmentations[2 * i]));
    b.noisy[2 * i + 1] =
        extractor.log_mel(apply_policy(second, data.policy, *data.assets, item, &b.augmentations[2 * i + 1]));
  });
  return b;
}

namespace {

// Features for the whole batch, noisy rows first, then clean.
template <class T>
Tensor<T> batch_input(const Batch& b, bool with_clean) {
  std::vector<LogMelSpectrogram> all(b.noisy.begin(), b.noisy.end());
  if (with_clean) all.insert(all.end(), b.clean.begin(), b.clean.end());
  return pack_features<T>(all);
}

std::vector<int> iota_rows(int from, int count) {
  std::vector<int> r(static_cast<std::size_t>(count));
  std::iota(r.begin(), r.end(), from);
  return r;
}

// Forward and backward for one batch. Returns the loss and fills grads.
template <class T>
double loss_and_grads(const Encoder& enc, Tensor<T> x, int n, const LossConfig& loss,
                      std::vector<Tensor<double>>* grads) {
  Tape<T> tape;
  const auto params = enc.bind(tape);
  const auto xv = tape.constant(std::move(x));
  const auto e = enc.forward<T>(tape, params, xv);
  // Non-finite embeddings would otherwise surface as a zero-norm error in the
  // loss; report them as the non-finite loss they lead to.
  for (const T v : e.value().data)
    if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
  const auto noisy = ad::gather_rows(e, iota_rows(0, 2 * n));
  Var<T> clean;
  if (uses_clean(loss.variant)) clean = ad::gather_rows(e, iota_rows(2 * n, n));
  const auto g = build_loss(noisy, clean, loss);
  const double value = static_cast<double>(g.total.value()[0]);
  if (grads) {
    if (!std::isfinite(value)) return value;
    tape.backward(g.total);
    grads->clear();
    for (const auto& p : params) grads->push_back(tensor_cast<double>(p.grad()));
  }
  return value;
}

void check_lockstep(const std::vector<std::pair<std::string, TrainConfig>>& runs) {
  if (runs.empty()) throw ContractError("train: no runs");
  const auto& a = runs.front().second;
  for (const auto& [name, c] : runs) {
    c.validate();
    if (c.batch_size != a.batch_size || c.segment_len_s != a.segment_len_s || c.epochs != a.epochs ||
        c.seed != a.seed || c.precision != a.precision || c.lr0 != a.lr0 || c.lr_decay != a.lr_decay ||
        c.decay_every != a.decay_every || c.history_wall_time != a.history_wall_time)
      throw ContractError("lockstep runs may differ only in their loss settings");
  }
}

}  // namespace

double batch_loss(const Encoder& encoder, const Batch& batch, const LossConfig& loss) {
  const bool with_clean = uses_clean(loss.variant);
  if (with_clean && batch.clean.size() != batch.utterances.size())
    throw ContractError("batch_loss: batch has no clean segments");
  return loss_and_grads<double>(encoder, batch_input<double>(batch, with_clean),
                                static_cast<int>(batch.utterances.size()), loss, nullptr);
}

std::vector<TrainRun> train_lockstep(const std::vector<std::pair<std::string, TrainConfig>>& runs,
                                     const Encoder& initial, const TrainData& data,
                                     const TrainOptions& options) {
  check_lockstep(runs);
  if (!data.corpus || !data.assets) throw ContractError("train: corpus and assets are required");
  const TrainConfig& shared = runs.front().second;
  data.policy.validate();
  data.features.validate();
  data.corpus->manifest.validate(2.0 * shared.segment_len_s);

  std::vector<TrainRun> out;
  bool any_clean = false;
  for (const auto& [name, c] : runs) {
    out.push_back({name, c, initial, {}, {}, 0.0});
    any_clean = any_clean || uses_clean(c.loss.variant);
  }
  const int n = shared.batch_size;
  const int per_epoch = static_cast<int>(data.corpus->size() / static_cast<std::size_t>(n));
  if (per_epoch < 1) throw ConfigError("corpus is smaller than one batch");
  const FeatureExtractor extractor(data.features);
  Rng rng(derive_seed(shared.seed, "trainer/batches"));
  std::vector<double> loss_sum(out.size());
  std::vector<double> elapsed(out.size());
  std::vector<Tensor<double>> grads;
  std::int64_t step = 0;

  for (int epoch = 0; epoch < shared.epochs; ++epoch) {
    std::fill(loss_sum.begin(), loss_sum.end(), 0.0);
    std::fill(elapsed.begin(), elapsed.end(), 0.0);
    for (int bi = 0; bi < per_epoch; ++bi, ++step) {
      const auto t0 = std::chrono::steady_clock::now();
      const Batch batch = assemble_batch(data, extractor, n, shared.segment_len_s, rng, any_clean);
      const double share =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / out.size();
      for (std::size_t r = 0; r < out.size(); ++r) {
        const auto t1 = std::chrono::steady_clock::now();
        TrainRun& run = out[r];
        const bool with_clean = uses_clean(run.config.loss.variant);
        const double lr = lr_at(run.config, epoch);
        const double value =
            run.config.precision == Precision::f32
                ? loss_and_grads<float>(run.encoder, batch_input<float>(batch, with_clean), n, run.config.loss, &grads)
                : loss_and_grads<double>(run.encoder, batch_input<double>(batch, with_clean), n, run.config.loss, &grads);
        if (!std::isfinite(value))
          throw NumericError("run '" + run.name + "': non-finite loss " + shortest(value) + " at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(bi) + ", step " +
                             std::to_string(step));
        adam_step(run.adam, run.encoder.params(), grads, lr);
        for (const auto& p : run.encoder.params())
          for (double v : p.value.data)
            if (!std::isfinite(v))
              throw NumericError("run '" + run.name + "': parameter " + p.name + " became non-finite at epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(bi) + ", step " +
                                 std::to_string(step));
        loss_sum[r] += value;
        elapsed[r] += share + std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
      }
    }
    for (std::size_t r = 0; r < out.size(); ++r) {
      TrainRun& run = out[r];
      EpochRecord rec;
      rec.epoch = epoch;
      rec.mean_loss = loss_sum[r] / per_epoch;
      rec.lr = lr_at(run.config, epoch);
      run.seconds += elapsed[r];
      rec.seconds = run.config.history_wall_time ? elapsed[r] : 0.0;
      if (options.validate) rec.val_eer = options.validate(run.encoder, epoch);
      run.history.epochs.push_back(rec);
      if (options.checkpoint_dir) {
        auto dir = out.size() == 1 ? *options.checkpoint_dir : *options.checkpoint_dir / run.name;
        std::filesystem::create_directories(dir);
        run.encoder.save(dir / "checkpoint.ckpt");
      }
      if (options.on_epoch) options.on_epoch(run.name, rec);
    }
  }
  return out;
}

TrainRun train(const TrainConfig& config, const Encoder& initial, const TrainData& data,
               const TrainOptions& options) {
  return std::move(train_lockstep({{to_string(config.loss.variant), config}}, initial, data, options).front());
}

}  // namespace ssk
