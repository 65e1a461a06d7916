// src/config.cc

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

#include "ssk/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "ssk/error.h"
#include "ssk/random.h"

namespace ssk {

void ExperimentConfig::validate() const {
  if (config_version != kConfigVersion)
    throw ConfigError("unsupported config_version " + std::to_string(config_version));
  corpus.synth.validate();
  eval_corpus.synth.validate();
  augmentation.validate();
  features.validate();
  encoder_config().validate();
  train_config().validate();
  eval.validate();
  if (ablation.seeds.empty()) throw ConfigError("ablation: at least one seed is required");
  if (gradcheck.n < 2 || gradcheck.dim < 1 || !(gradcheck.eps > 0) || !(gradcheck.tolerance > 0))
    throw ConfigError("gradcheck: need n >= 2, dim >= 1 and positive eps and tolerance");
  gradcheck.encoder.validate();
  if (gradcheck.frames < gradcheck.encoder.receptive_field())
    throw ConfigError("gradcheck: frames shorter than the tiny encoder's receptive field");
}

EncoderConfig ExperimentConfig::encoder_config() const {
  EncoderConfig c = encoder;
  c.seed = seed;
  return c;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig c = trainer;
  c.seed = seed;
  return c;
}

namespace {

std::string where(const std::string& source, const YAML::Mark& m) {
  if (m.is_null()) return source + ": ";
  return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
}

// Reads the keys of one mapping and rejects whatever was not read.
class Section {
 public:
  Section(YAML::Node node, std::string name, const std::string& source)
      : node_(std::move(node)), name_(std::move(name)), source_(source) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      throw ConfigError(where(source_, node_.Mark()) + "section '" + name_ + "' must be a mapping");
  }

  bool has(const char* key) const { return node_ && node_.IsMap() && node_[key]; }

  template <class T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    seen_.insert(key);
    const YAML::Node v = node_[key];
    try {
      if (!v.IsScalar()) throw YAML::BadConversion(v.Mark());
      out = v.as<T>();
    } catch (const YAML::BadConversion&) {
      throw ConfigError(where(source_, v.Mark()) + "key '" + key + "' in section '" + name_ +
                        "' has the wrong type");
    }
  }

  void get_path(const char* key, std::optional<std::filesystem::path>& out, const std::filesystem::path& base) {
    std::string s;
    if (!has(key)) return;
    get(key, s);
    std::filesystem::path p(s);
    out = p.is_relative() && !base.empty() ? base / p : p;
  }

  YAML::Node raw(const char* key) {
    if (!has(key)) return {};
    seen_.insert(key);
    return node_[key];
  }

  Section sub(const char* key) { return Section(raw(key), name_.empty() ? key : name_ + "." + key, source_); }

  YAML::Mark mark() const { return node_ ? node_.Mark() : YAML::Mark::null_mark(); }
  const std::string& name() const { return name_; }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key))
        throw ConfigError(where(source_, kv.first.Mark()) + "unknown key '" + key + "'" +
                          (name_.empty() ? std::string() : " in section '" + name_ + "'"));
    }
  }

 private:
  YAML::Node node_;
  std::string name_;
  const std::string& source_;
  std::set<std::string> seen_;
};

template <class Fn>
void anchored(const Section& s, const std::string& source, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(source, 0) == 0) throw;
    throw ConfigError(where(source, s.mark()) + msg);
  }
}

void read_corpus(Section& s, CorpusConfig& c, std::optional<std::filesystem::path>& path,
                 const std::filesystem::path& base) {
  s.get("n_speakers", c.n_speakers);
  s.get("utts_per_speaker", c.utts_per_speaker);
  s.get("duration_s", c.duration_s);
  s.get("seed", c.seed);
  s.get("segment_len_s", c.segment_len_s);
  s.get("first_speaker_id", c.first_speaker_id);
  s.get("id_prefix", c.id_prefix);
  s.get_path("path", path, base);
}

EncoderConfig read_encoder(Section s, EncoderConfig c, const std::string& source, bool with_seed) {
  s.get("input_dim", c.input_dim);
  s.get("embedding_dim", c.embedding_dim);
  if (with_seed) s.get("seed", c.seed);
  if (s.has("convs")) {
    const YAML::Node convs = s.raw("convs");
    if (!convs.IsSequence())
      throw ConfigError(where(source, convs.Mark()) + "'" + s.name() + ".convs' must be a list");
    c.convs.clear();
    for (const auto& item : convs) {
      Section layer(item, s.name() + ".convs[]", source);
      if (!item.IsMap()) throw ConfigError(where(source, item.Mark()) + "each conv layer must be a mapping");
      ConvSpec spec;
      layer.get("channels", spec.channels);
      layer.get("kernel", spec.kernel);
      layer.get("dilation", spec.dilation);
      layer.finish();
      c.convs.push_back(spec);
    }
  }
  s.finish();
  anchored(s, source, [&] { c.validate(); });
  return c;
}

std::string num(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  // Keep floats recognizable as floats.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string yes_no(bool b) { return b ? "true" : "false"; }

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source,
                                         const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(source, e.mark) + "YAML syntax error: " + e.msg);
  }
  if (!root || !root.IsMap()) throw ConfigError(source + ": the config must be a YAML mapping");
  ExperimentConfig cfg;
  Section top(root, "", source);
  if (!top.has("config_version")) throw ConfigError(source + ": missing required key 'config_version'");
  top.get("config_version", cfg.config_version);
  if (cfg.config_version != kConfigVersion)
    throw ConfigError(where(source, root["config_version"].Mark()) + "unsupported config_version " +
                      std::to_string(cfg.config_version) + " (expected " + std::to_string(kConfigVersion) + ")");
  top.get("seed", cfg.seed);

  {
    Section s = top.sub("corpus");
    read_corpus(s, cfg.corpus.synth, cfg.corpus.path, base_dir);
    s.finish();
    anchored(s, source, [&] { cfg.corpus.synth.validate(); });
  }
  {
    Section s = top.sub("eval_corpus");
    read_corpus(s, cfg.eval_corpus.synth, cfg.eval_corpus.path, base_dir);
    s.get("augment_test", cfg.eval_corpus.augment_test);
    s.get("augment_seed", cfg.eval_corpus.augment_seed);
    s.finish();
    anchored(s, source, [&] { cfg.eval_corpus.synth.validate(); });
  }
  {
    Section s = top.sub("assets");
    auto& a = cfg.assets.synth;
    s.get("seed", cfg.assets.seed);
    s.get("noises_per_kind", a.noises_per_kind);
    s.get("noise_duration_s", a.noise_duration_s);
    s.get("n_rirs", a.n_rirs);
    s.get("rt60_min_s", a.rt60_min_s);
    s.get("rt60_max_s", a.rt60_max_s);
    s.get("babble_talkers", a.babble_talkers);
    s.get_path("path", cfg.assets.path, base_dir);
    s.finish();
    anchored(s, source, [&] {
      if (a.noises_per_kind < 1 || a.n_rirs < 1 || !(a.noise_duration_s > 0) || a.babble_talkers < 4 ||
          !(a.rt60_min_s > 0 && a.rt60_min_s <= a.rt60_max_s))
        throw ConfigError("invalid asset settings");
    });
  }
  {
    Section s = top.sub("augmentation");
    auto& p = cfg.augmentation;
    if (s.has("choices")) {
      const YAML::Node choices = s.raw("choices");
      if (!choices.IsSequence())
        throw ConfigError(where(source, choices.Mark()) + "'augmentation.choices' must be a list");
      p.choices.clear();
      for (const auto& c : choices) {
        try {
          p.choices.push_back(parse_augment_choice(c.as<std::string>()));
        } catch (const ConfigError& e) {
          throw ConfigError(where(source, c.Mark()) + e.what());
        }
      }
    }
    s.get("snr_low_db", p.snr_low_db);
    s.get("snr_high_db", p.snr_high_db);
    s.finish();
    anchored(s, source, [&] { p.validate(); });
  }
  {
    Section s = top.sub("features");
    s.get("fmin_hz", cfg.features.fmin_hz);
    s.get("fmax_hz", cfg.features.fmax_hz);
    s.finish();
    anchored(s, source, [&] { cfg.features.validate(); });
  }
  cfg.encoder = read_encoder(top.sub("encoder"), cfg.encoder, source, false);
  {
    Section s = top.sub("loss");
    auto& l = cfg.trainer.loss;
    std::string variant = to_string(l.variant), mode = to_string(l.negative_mode);
    s.get("tau", l.tau);
    s.get("variant", variant);
    s.get("detach_weights", l.detach_weights);
    s.get("negative_mode", mode);
    s.get("include_clean_anchor_tau_in_beta", l.include_clean_anchor_tau_in_beta);
    s.finish();
    anchored(s, source, [&] {
      l.variant = parse_loss_variant(variant);
      l.negative_mode = parse_negative_mode(mode);
      l.validate();
    });
  }
  {
    Section s = top.sub("trainer");
    auto& t = cfg.trainer;
    std::string precision = to_string(t.precision);
    s.get("batch_size", t.batch_size);
    s.get("segment_len_s", t.segment_len_s);
    s.get("epochs", t.epochs);
    s.get("lr0", t.lr0);
    s.get("lr_decay", t.lr_decay);
    s.get("decay_every", t.decay_every);
    s.get("precision", precision);
    s.get("history_wall_time", t.history_wall_time);
    s.finish();
    anchored(s, source, [&] {
      t.precision = parse_precision(precision);
      t.validate();
    });
  }
  {
    Section s = top.sub("eval");
    s.get("p_target", cfg.eval.p_target);
    s.get("c_miss", cfg.eval.c_miss);
    s.get("c_fa", cfg.eval.c_fa);
    s.finish();
    anchored(s, source, [&] { cfg.eval.validate(); });
  }
  {
    Section s = top.sub("ablation");
    if (s.has("seeds")) {
      const YAML::Node seeds = s.raw("seeds");
      if (!seeds.IsSequence()) throw ConfigError(where(source, seeds.Mark()) + "'ablation.seeds' must be a list");
      cfg.ablation.seeds.clear();
      for (const auto& v : seeds) {
        try {
          cfg.ablation.seeds.push_back(v.as<std::uint64_t>());
        } catch (const YAML::BadConversion&) {
          throw ConfigError(where(source, v.Mark()) + "ablation seeds must be unsigned integers");
        }
      }
    }
    s.finish();
  }
  {
    Section s = top.sub("gradcheck");
    auto& g = cfg.gradcheck;
    s.get("n", g.n);
    s.get("dim", g.dim);
    s.get("seed", g.seed);
    s.get("eps", g.eps);
    s.get("tolerance", g.tolerance);
    s.get("frames", g.frames);
    if (s.has("encoder")) g.encoder = read_encoder(s.sub("encoder"), g.encoder, source, true);
    s.finish();
  }
  top.finish();
  anchored(top, source, [&] { cfg.validate(); });
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_experiment_config(ss.str(), path.string(), path.parent_path());
}

std::string to_yaml(const ExperimentConfig& cfg) {
  std::ostringstream os;
  auto corpus = [&](const CorpusConfig& c, const std::optional<std::filesystem::path>& path) {
    os << "  n_speakers: " << c.n_speakers << "\n  utts_per_speaker: " << c.utts_per_speaker
       << "\n  duration_s: " << num(c.duration_s) << "\n  seed: " << c.seed
       << "\n  segment_len_s: " << num(c.segment_len_s) << "\n  first_speaker_id: " << c.first_speaker_id
       << "\n  id_prefix: " << quoted(c.id_prefix) << '\n';
    if (path) os << "  path: " << quoted(path->string()) << '\n';
  };
  auto encoder = [&](const EncoderConfig& e, const char* indent, bool with_seed) {
    os << indent << "input_dim: " << e.input_dim << '\n' << indent << "convs:\n";
    for (const auto& c : e.convs)
      os << indent << "  - {channels: " << c.channels << ", kernel: " << c.kernel << ", dilation: " << c.dilation
         << "}\n";
    os << indent << "embedding_dim: " << e.embedding_dim << '\n';
    if (with_seed) os << indent << "seed: " << e.seed << '\n';
  };
  os << "config_version: " << cfg.config_version << '\n' << "seed: " << cfg.seed << '\n';
  os << "corpus:\n";
  corpus(cfg.corpus.synth, cfg.corpus.path);
  os << "eval_corpus:\n";
  corpus(cfg.eval_corpus.synth, cfg.eval_corpus.path);
  os << "  augment_test: " << yes_no(cfg.eval_corpus.augment_test) << "\n  augment_seed: " << cfg.eval_corpus.augment_seed
     << '\n';
  const auto& a = cfg.assets.synth;
  os << "assets:\n  seed: " << cfg.assets.seed << "\n  noises_per_kind: " << a.noises_per_kind
     << "\n  noise_duration_s: " << num(a.noise_duration_s) << "\n  n_rirs: " << a.n_rirs
     << "\n  rt60_min_s: " << num(a.rt60_min_s) << "\n  rt60_max_s: " << num(a.rt60_max_s)
     << "\n  babble_talkers: " << a.babble_talkers << '\n';
  if (cfg.assets.path) os << "  path: " << quoted(cfg.assets.path->string()) << '\n';
  os << "augmentation:\n  choices: [";
  for (std::size_t i = 0; i < cfg.augmentation.choices.size(); ++i)
    os << (i ? ", " : "") << to_string(cfg.augmentation.choices[i]);
  os << "]\n  snr_low_db: " << num(cfg.augmentation.snr_low_db) << "\n  snr_high_db: " << num(cfg.augmentation.snr_high_db)
     << '\n';
  os << "features:\n  fmin_hz: " << num(cfg.features.fmin_hz) << "\n  fmax_hz: " << num(cfg.features.fmax_hz) << '\n';
  os << "encoder:\n";
  encoder(cfg.encoder, "  ", false);
  const auto& l = cfg.trainer.loss;
  os << "loss:\n  tau: " << num(l.tau) << "\n  variant: " << to_string(l.variant)
     << "\n  detach_weights: " << yes_no(l.detach_weights) << "\n  negative_mode: " << to_string(l.negative_mode)
     << "\n  include_clean_anchor_tau_in_beta: " << yes_no(l.include_clean_anchor_tau_in_beta) << '\n';
  const auto& t = cfg.trainer;
  os << "trainer:\n  batch_size: " << t.batch_size << "\n  segment_len_s: " << num(t.segment_len_s)
     << "\n  epochs: " << t.epochs << "\n  lr0: " << num(t.lr0) << "\n  lr_decay: " << num(t.lr_decay)
     << "\n  decay_every: " << t.decay_every << "\n  precision: " << to_string(t.precision)
     << "\n  history_wall_time: " << yes_no(t.history_wall_time) << '\n';
  os << "eval:\n  p_target: " << num(cfg.eval.p_target) << "\n  c_miss: " << num(cfg.eval.c_miss)
     << "\n  c_fa: " << num(cfg.eval.c_fa) << '\n';
  os << "ablation:\n  seeds: [";
  for (std::size_t i = 0; i < cfg.ablation.seeds.size(); ++i) os << (i ? ", " : "") << cfg.ablation.seeds[i];
  os << "]\n";
  const auto& g = cfg.gradcheck;
  os << "gradcheck:\n  n: " << g.n << "\n  dim: " << g.dim << "\n  seed: " << g.seed << "\n  eps: " << num(g.eps)
     << "\n  tolerance: " << num(g.tolerance) << "\n  frames: " << g.frames << "\n  encoder:\n";
  encoder(g.encoder, "    ", true);
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_yaml(cfg))));
  return buf;
}

}  // namespace ssk
