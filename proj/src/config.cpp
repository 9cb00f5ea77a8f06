#include "tasnn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tasnn {

using nlohmann::json;

const char* strategy_name(TAStrategy s) {
  switch (s) {
    case TAStrategy::S1:
      return "S1";
    case TAStrategy::S2:
      return "S2";
    case TAStrategy::S3:
      return "S3";
    case TAStrategy::S4:
      return "S4";
  }
  return "S1";
}

TAStrategy strategy_from_name(const std::string& name) {
  if (name == "S1" || name == "s1") return TAStrategy::S1;
  if (name == "S2" || name == "s2") return TAStrategy::S2;
  if (name == "S3" || name == "s3") return TAStrategy::S3;
  if (name == "S4" || name == "s4") return TAStrategy::S4;
  throw ConfigError("unknown TA strategy '" + name + "' (expected S1..S4)");
}

namespace {

void reject_unknown(const json& obj, const std::string& section,
                    const std::set<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!known.count(key)) {
      throw ConfigError("unknown key '" + key + "' in config section '" +
                        section + "'");
    }
  }
}

template <typename T>
void take(const json& obj, const char* key, T& into) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key +
                      "' has the wrong type");
  }
}

void take_real(const json& obj, const char* key, real& into) {
  double v = double(into);
  take(obj, key, v);
  into = static_cast<real>(v);
}

}  // namespace

void ExperimentConfig::validate() const {
  agg.validate();
  neuron.validate();
  train.validate();
  if (ta_r < 1) throw ConfigError("ta.r must be >= 1");
  if (ta_d_th < 0 || ta_d_th > 1) throw ConfigError("ta.d_th must lie in [0,1]");
  if (eval_crops < 1) throw ConfigError("eval.crops must be >= 1");
  if (eval_proportion < 0 || eval_proportion > 1) {
    throw ConfigError("eval.proportion must lie in [0,1]");
  }
  if (irp_seeds < 1) throw ConfigError("eval.irp_seeds must be >= 1");
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw ConfigError("synth.train_fraction must lie in (0,1)");
  }
  synth.validate();
  parse_structure(structure);
}

NetworkSpec ExperimentConfig::network_spec(std::size_t in_c, std::size_t in_h,
                                           std::size_t in_w) const {
  NetworkSpec spec;
  spec.in_c = in_c;
  spec.in_h = in_h;
  spec.in_w = in_w;
  spec.T = agg.T;
  spec.layers = parse_structure(structure);
  spec.strategy = strategy;
  spec.neuron = neuron;
  spec.ta_r = ta_r;
  spec.ta_hidden = ta_hidden;
  spec.ta_d_th = ta_d_th;
  spec.ta_squeeze_prepool = ta_squeeze_prepool;
  spec.bias = bias;
  spec.structure = structure;
  spec.validate();
  return spec;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config does not parse: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc, "<root>",
                 {"dataset", "aggregation", "network", "neuron", "ta", "train",
                  "eval", "synth"});

  ExperimentConfig cfg;

  if (doc.contains("dataset")) {
    const json& d = doc["dataset"];
    reject_unknown(d, "dataset", {"dir"});
    take(d, "dir", cfg.data_dir);
  }

  if (doc.contains("aggregation")) {
    const json& a = doc["aggregation"];
    reject_unknown(a, "aggregation", {"dt_us", "T", "t0_us"});
    take(a, "dt_us", cfg.agg.dt_us);
    take(a, "T", cfg.agg.T);
    take(a, "t0_us", cfg.agg.t0_us);
  }

  if (doc.contains("network")) {
    const json& n = doc["network"];
    reject_unknown(n, "network", {"structure", "strategy", "neuron", "bias"});
    take(n, "structure", cfg.structure);
    if (n.contains("strategy")) {
      cfg.strategy = strategy_from_name(n.at("strategy").get<std::string>());
    }
    if (n.contains("neuron")) {
      const std::string mode = n.at("neuron").get<std::string>();
      if (mode == "lif")
        cfg.neuron.mode = NeuronMode::LIF;
      else if (mode == "liaf")
        cfg.neuron.mode = NeuronMode::LIAF;
      else
        throw ConfigError("network.neuron must be 'lif' or 'liaf'");
    }
    take(n, "bias", cfg.bias);
  }

  if (doc.contains("neuron")) {
    const json& n = doc["neuron"];
    reject_unknown(n, "neuron",
                   {"u_th", "leak", "surrogate_width", "detach_reset"});
    take_real(n, "u_th", cfg.neuron.u_th);
    take_real(n, "leak", cfg.neuron.leak);
    take_real(n, "surrogate_width", cfg.neuron.surrogate_width);
    take(n, "detach_reset", cfg.neuron.detach_reset);
  }

  if (doc.contains("ta")) {
    const json& t = doc["ta"];
    reject_unknown(t, "ta", {"r", "d_th", "hidden", "squeeze_prepool"});
    take(t, "r", cfg.ta_r);
    take_real(t, "d_th", cfg.ta_d_th);
    if (t.contains("hidden")) {
      const std::string h = t.at("hidden").get<std::string>();
      if (h == "ceil")
        cfg.ta_hidden = TAHiddenRule::Ceil;
      else if (h == "floor")
        cfg.ta_hidden = TAHiddenRule::Floor;
      else
        throw ConfigError("ta.hidden must be 'ceil' or 'floor'");
    }
    take(t, "squeeze_prepool", cfg.ta_squeeze_prepool);
  }

  if (doc.contains("train")) {
    const json& t = doc["train"];
    reject_unknown(t, "train",
                   {"epochs", "batch", "lr", "beta1", "beta2", "epsilon",
                    "rcs", "seed", "deterministic", "loss", "threads"});
    take(t, "epochs", cfg.train.epochs);
    take(t, "batch", cfg.train.batch);
    take_real(t, "lr", cfg.train.lr);
    take_real(t, "beta1", cfg.train.beta1);
    take_real(t, "beta2", cfg.train.beta2);
    take_real(t, "epsilon", cfg.train.epsilon);
    take(t, "rcs", cfg.train.use_rcs);
    take(t, "seed", cfg.train.seed);
    take(t, "deterministic", cfg.train.deterministic);
    take(t, "threads", cfg.train.threads);
    if (t.contains("loss")) {
      const std::string l = t.at("loss").get<std::string>();
      if (l == "mse")
        cfg.train.loss = LossKind::MseRate;
      else if (l == "ce")
        cfg.train.loss = LossKind::CrossEntropyRate;
      else
        throw ConfigError("train.loss must be 'mse' or 'ce'");
    }
  }

  if (doc.contains("eval")) {
    const json& e = doc["eval"];
    reject_unknown(e, "eval", {"crops", "pruning", "proportion", "irp_seeds"});
    take(e, "crops", cfg.eval_crops);
    if (e.contains("pruning")) {
      const std::string p = e.at("pruning").get<std::string>();
      if (p == "none")
        cfg.eval_pruning = PruneKind::None;
      else if (p == "iap")
        cfg.eval_pruning = PruneKind::Iap;
      else if (p == "irp")
        cfg.eval_pruning = PruneKind::Irp;
      else
        throw ConfigError("eval.pruning must be 'none', 'iap' or 'irp'");
    }
    take_real(e, "proportion", cfg.eval_proportion);
    take(e, "irp_seeds", cfg.irp_seeds);
  }

  if (doc.contains("synth")) {
    const json& s = doc["synth"];
    reject_unknown(s, "synth",
                   {"width", "height", "classes", "samples_per_class",
                    "duration_us", "signal_windows_us", "noise_rate_per_pixel_us",
                    "motions", "bar_length", "bar_width", "seed",
                    "train_fraction"});
    take(s, "width", cfg.synth.width);
    take(s, "height", cfg.synth.height);
    bool resize_motions = false;
    if (s.contains("classes")) {
      take(s, "classes", cfg.synth.n_classes);
      resize_motions = true;
    }
    take(s, "samples_per_class", cfg.synth.samples_per_class);
    take(s, "duration_us", cfg.synth.duration_us);
    take(s, "noise_rate_per_pixel_us", cfg.synth.noise_rate_per_pixel_us);
    take(s, "bar_length", cfg.synth.bar_length);
    take(s, "bar_width", cfg.synth.bar_width);
    take(s, "seed", cfg.synth.seed);
    take(s, "train_fraction", cfg.train_fraction);
    if (s.contains("signal_windows_us")) {
      cfg.synth.signal_windows.clear();
      for (const json& w : s.at("signal_windows_us")) {
        if (!w.is_array() || w.size() != 2) {
          throw ConfigError("synth.signal_windows_us entries are [start,len]");
        }
        cfg.synth.signal_windows.emplace_back(w[0].get<std::uint64_t>(),
                                              w[1].get<std::uint64_t>());
      }
    }
    if (s.contains("motions")) {
      cfg.synth.motions.clear();
      for (const json& m : s.at("motions")) {
        reject_unknown(m, "synth.motions",
                       {"angle_deg", "speed_px_per_ms", "oscillate"});
        MotionSpec ms;
        double deg = 0;
        take(m, "angle_deg", deg);
        ms.angle_rad = deg * M_PI / 180.0;
        take(m, "speed_px_per_ms", ms.speed_px_per_ms);
        take(m, "oscillate", ms.oscillate);
        cfg.synth.motions.push_back(ms);
      }
      resize_motions = false;
    } else if (resize_motions) {
      cfg.synth.motions.resize(cfg.synth.n_classes);
      for (std::size_t c = 0; c < cfg.synth.n_classes; ++c) {
        cfg.synth.motions[c] = {2.0 * M_PI * static_cast<double>(c) /
                                    static_cast<double>(cfg.synth.n_classes),
                                1.0, false};
      }
    }
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg, bool pretty) {
  json doc;
  doc["dataset"]["dir"] = cfg.data_dir;
  doc["aggregation"] = {{"dt_us", cfg.agg.dt_us},
                        {"T", cfg.agg.T},
                        {"t0_us", cfg.agg.t0_us}};
  doc["network"] = {
      {"structure", cfg.structure},
      {"strategy", strategy_name(cfg.strategy)},
      {"neuron", cfg.neuron.mode == NeuronMode::LIF ? "lif" : "liaf"},
      {"bias", cfg.bias}};
  doc["neuron"] = {{"u_th", double(cfg.neuron.u_th)},
                   {"leak", double(cfg.neuron.leak)},
                   {"surrogate_width", double(cfg.neuron.surrogate_width)},
                   {"detach_reset", cfg.neuron.detach_reset}};
  doc["ta"] = {{"r", cfg.ta_r},
               {"d_th", double(cfg.ta_d_th)},
               {"hidden", cfg.ta_hidden == TAHiddenRule::Ceil ? "ceil" : "floor"},
               {"squeeze_prepool", cfg.ta_squeeze_prepool}};
  doc["train"] = {
      {"epochs", cfg.train.epochs},
      {"batch", cfg.train.batch},
      {"lr", double(cfg.train.lr)},
      {"beta1", double(cfg.train.beta1)},
      {"beta2", double(cfg.train.beta2)},
      {"epsilon", double(cfg.train.epsilon)},
      {"rcs", cfg.train.use_rcs},
      {"seed", cfg.train.seed},
      {"deterministic", cfg.train.deterministic},
      {"loss", cfg.train.loss == LossKind::MseRate ? "mse" : "ce"},
      {"threads", cfg.train.threads}};
  doc["eval"] = {{"crops", cfg.eval_crops},
                 {"pruning", cfg.eval_pruning == PruneKind::None
                                 ? "none"
                                 : (cfg.eval_pruning == PruneKind::Iap
                                        ? "iap"
                                        : "irp")},
                 {"proportion", double(cfg.eval_proportion)},
                 {"irp_seeds", cfg.irp_seeds}};
  json windows = json::array();
  for (const auto& [start, len] : cfg.synth.signal_windows) {
    windows.push_back(json::array({start, len}));
  }
  json motions = json::array();
  for (const MotionSpec& m : cfg.synth.motions) {
    motions.push_back({{"angle_deg", m.angle_rad * 180.0 / M_PI},
                       {"speed_px_per_ms", m.speed_px_per_ms},
                       {"oscillate", m.oscillate}});
  }
  doc["synth"] = {{"width", cfg.synth.width},
                  {"height", cfg.synth.height},
                  {"classes", cfg.synth.n_classes},
                  {"samples_per_class", cfg.synth.samples_per_class},
                  {"duration_us", cfg.synth.duration_us},
                  {"signal_windows_us", windows},
                  {"noise_rate_per_pixel_us", cfg.synth.noise_rate_per_pixel_us},
                  {"motions", motions},
                  {"bar_length", cfg.synth.bar_length},
                  {"bar_width", cfg.synth.bar_width},
                  {"seed", cfg.synth.seed},
                  {"train_fraction", cfg.train_fraction}};
  return pretty ? doc.dump(2) : doc.dump();
}

}  // namespace tasnn
