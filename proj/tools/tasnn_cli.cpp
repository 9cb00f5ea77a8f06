#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tasnn/checkpoint.hpp"
#include "tasnn/io.hpp"

using namespace tasnn;

namespace {

void echo_config(const ExperimentConfig& cfg) {
  std::cout << "resolved_config=" << config_to_json(cfg) << "\n";
}

Dataset load_split(const std::string& dir, SplitSel split) {
  Dataset d = load_dataset_dir(dir, split);
  if (d.samples.empty()) {
    throw DataError("no samples in " + dir + " for the requested split");
  }
  return d;
}

int run_gen(const std::string& config_path, const std::string& out_dir,
            std::int64_t seed_override) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed_override >= 0) {
    cfg.train.seed = static_cast<std::uint64_t>(seed_override);
    cfg.synth.seed = derive_seed(cfg.train.seed, "synth");
  }
  echo_config(cfg);
  const auto [train, test] = make_split_dataset(cfg.synth, cfg.train_fraction);
  write_dataset_dir(train, test, out_dir);
  std::cout << "dataset_dir=" << out_dir << " train_samples="
            << train.samples.size() << " test_samples=" << test.samples.size()
            << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_ckpt, const std::string& strategy,
              const std::string& neuron, int rcs_flag,
              std::int64_t seed_override, std::int64_t epochs_override,
              std::size_t threads, int deterministic_flag) {
  ExperimentConfig cfg = load_config(config_path);
  if (!data_dir.empty()) cfg.data_dir = data_dir;
  if (!strategy.empty()) cfg.strategy = strategy_from_name(strategy);
  if (!neuron.empty()) {
    if (neuron == "lif")
      cfg.neuron.mode = NeuronMode::LIF;
    else if (neuron == "liaf")
      cfg.neuron.mode = NeuronMode::LIAF;
    else
      throw ConfigError("--neuron must be lif or liaf");
  }
  if (rcs_flag >= 0) cfg.train.use_rcs = rcs_flag != 0;
  if (seed_override >= 0) {
    cfg.train.seed = static_cast<std::uint64_t>(seed_override);
  }
  if (epochs_override > 0) {
    cfg.train.epochs = static_cast<std::size_t>(epochs_override);
  }
  if (deterministic_flag >= 0) cfg.train.deterministic = deterministic_flag != 0;
  cfg.train.threads = threads;
  if (cfg.data_dir.empty()) throw ConfigError("train needs --data or dataset.dir");
  echo_config(cfg);

  const Dataset train_set = load_split(cfg.data_dir, SplitSel::Train);
  const Dataset test_set = load_split(cfg.data_dir, SplitSel::Test);
  NetworkSpec spec = cfg.network_spec(train_set.n_polarities, train_set.height,
                                      train_set.width);
  Network net = Network::build(spec, derive_seed(cfg.train.seed, "init"));
  std::cout << "params=" << net.param_count()
            << " ta_params=" << net.ta_param_count() << "\n";

  const History history =
      train_network(net, train_set, test_set, cfg.agg, cfg.train, &std::cout);
  save_checkpoint(out_ckpt, net, cfg, history);
  std::cout << "checkpoint=" << out_ckpt << " final_eval_acc="
            << (history.empty() ? 0.0 : history.back().eval_accuracy) << "\n";
  return 0;
}

void print_eval(const EvalResult& res) {
  std::cout << "accuracy=" << res.accuracy
            << " evaluated=" << res.evaluated << " skipped=" << res.skipped
            << " mean_frames_retained=" << res.mean_frames_retained << "\n";
  for (std::size_t k = 0; k < res.per_class_accuracy.size(); ++k) {
    std::cout << "class_" << k << "_acc=" << res.per_class_accuracy[k]
              << " class_" << k << "_n=" << res.per_class_total[k] << "\n";
  }
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir,
             std::size_t crops, double iap_p, double irp_p, std::size_t seeds,
             std::int64_t seed_override, const std::string& report_path,
             std::size_t threads) {
  if (iap_p >= 0 && irp_p >= 0) {
    throw ConfigError("choose one of --iap and --irp");
  }
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  echo_config(ckpt.config);
  const Dataset test_set = load_split(data_dir, SplitSel::Test);

  const std::uint64_t seed = seed_override >= 0
                                 ? static_cast<std::uint64_t>(seed_override)
                                 : ckpt.config.train.seed;
  EvalConfig ec;
  ec.n_crops = crops;
  ec.threads = threads;
  double p = 0;
  if (iap_p >= 0) {
    ec.prune = PruneKind::Iap;
    p = iap_p;
  } else if (irp_p >= 0) {
    ec.prune = PruneKind::Irp;
    p = irp_p;
  }
  ec.p = static_cast<real>(p);

  double mean = 0, stddev = 0, retained = 1;
  if (ec.prune == PruneKind::Irp) {
    std::vector<double> accs;
    EvalResult last;
    for (std::size_t s = 0; s < seeds; ++s) {
      ec.seed = derive_seed(seed, "irp-run", s);
      last = evaluate_network(ckpt.net, test_set, ckpt.config.agg, ec);
      accs.push_back(last.accuracy);
      std::cout << "irp_seed=" << s << " accuracy=" << last.accuracy << "\n";
    }
    for (const double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0;
    for (const double a : accs) var += (a - mean) * (a - mean);
    stddev = accs.size() > 1
                 ? std::sqrt(var / static_cast<double>(accs.size() - 1))
                 : 0.0;
    retained = last.mean_frames_retained;
    print_eval(last);
    std::cout << "irp_mean_accuracy=" << mean << " irp_std=" << stddev << "\n";
  } else {
    ec.seed = derive_seed(seed, "irp-run", 0);
    const EvalResult res =
        evaluate_network(ckpt.net, test_set, ckpt.config.agg, ec);
    mean = res.accuracy;
    retained = res.mean_frames_retained;
    print_eval(res);
  }

  const CostReport rep = estimate_flops(
      ckpt.net,
      retained_for_proportion(ckpt.net, ec.prune, static_cast<real>(p)));
  SweepPoint pt{p, mean, stddev, rep.reduction_guarded_pct};
  write_sweep_csv({pt}, report_path);
  std::cout << "report=" << report_path
            << " flops_reduction_pct=" << rep.reduction_guarded_pct
            << " mean_frames_retained=" << retained << "\n";
  return 0;
}

int run_sweep(const std::string& ckpt_path, const std::string& data_dir,
              const std::string& proportions_csv, const std::string& method,
              std::size_t seeds, std::size_t crops, const std::string& out_path,
              std::size_t threads) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  echo_config(ckpt.config);
  const Dataset test_set = load_split(data_dir, SplitSel::Test);

  std::vector<double> proportions;
  std::string cur;
  for (std::size_t i = 0; i <= proportions_csv.size(); ++i) {
    if (i == proportions_csv.size() || proportions_csv[i] == ',') {
      if (!cur.empty()) {
        try {
          proportions.push_back(std::stod(cur));
        } catch (const std::exception&) {
          throw ConfigError("--proportions: bad number '" + cur + "'");
        }
        cur.clear();
      }
    } else {
      cur.push_back(proportions_csv[i]);
    }
  }
  if (proportions.empty()) throw ConfigError("--proportions is empty");

  PruneKind kind;
  if (method == "iap")
    kind = PruneKind::Iap;
  else if (method == "irp")
    kind = PruneKind::Irp;
  else
    throw ConfigError("--method must be iap or irp");

  const std::vector<SweepPoint> points =
      pruning_sweep(ckpt.net, test_set, ckpt.config.agg, proportions, kind,
                    seeds, crops, threads);
  write_sweep_csv(points, out_path);
  for (const SweepPoint& pt : points) {
    std::cout << "proportion=" << pt.proportion
              << " accuracy_mean=" << pt.accuracy_mean
              << " accuracy_std=" << pt.accuracy_std
              << " flops_reduction_pct=" << pt.flops_reduction_pct << "\n";
  }
  std::cout << "sweep_file=" << out_path << "\n";
  return 0;
}

int run_gradcheck(const std::string& config_path, double eps) {
  ExperimentConfig cfg = load_config(config_path);
  echo_config(cfg);
  if (cfg.neuron.mode != NeuronMode::LIAF) {
    throw ConfigError(
        "gradcheck uses finite differences and needs the analog model; "
        "set network.neuron to 'liaf'");
  }
  NetworkSpec spec =
      cfg.network_spec(2, cfg.synth.height, cfg.synth.width);
  Network net = Network::build(spec, derive_seed(cfg.train.seed, "init"));
  if (net.param_count() > 200000) {
    throw ConfigError("gradcheck network has " +
                      std::to_string(net.param_count()) +
                      " parameters; use a tiny structure");
  }
  // deterministic random frames in place of a dataset; retry until every
  // membrane value clears the surrogate window and the relu kink, where
  // finite differences are meaningful
  const real required_margin = cfg.neuron.surrogate_width / 2 + real(1e-3);
  FrameTensor frames{Tensor({spec.T, spec.in_c, spec.in_h, spec.in_w})};
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    Rng rng(derive_seed(cfg.train.seed, "gradcheck-frames", attempt));
    frames.values.fill_uniform(rng, 0, real(2));
    net.forward(frames, RunMode::Train);
    if (net.min_membrane_margin() >= required_margin) break;
    if (attempt == 63) {
      std::cerr << "warning: no input with membrane margin "
                << double(required_margin) << " found; expect kink noise\n";
    }
  }
  const GradCheckResult res =
      gradient_check(net, frames, 0, eps, cfg.train.loss);
  std::cout << "max_rel_error=" << res.max_rel_error
            << " location=" << res.location << "\n";
  if (!(res.max_rel_error < 1e-4)) {
    std::cerr << "gradient check failed: " << res.max_rel_error << " at "
              << res.location << "\n";
    return 2;
  }
  return 0;
}

int run_info(const std::string& ckpt_path, double proportion) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  echo_config(ckpt.config);
  Network& net = ckpt.net;
  const CostReport params = count_params(net);
  std::cout << "structure=" << net.spec().structure
            << " strategy=" << strategy_name(net.spec().strategy)
            << " T=" << net.spec().T << "\n";
  std::cout << "total_params=" << params.total_params
            << " ta_params=" << params.ta_params
            << " ta_overhead_pct=" << params.ta_overhead_pct << "\n";
  {
    // the other hidden-width convention, for the record
    NetworkSpec alt = net.spec();
    alt.ta_hidden = alt.ta_hidden == TAHiddenRule::Ceil ? TAHiddenRule::Floor
                                                        : TAHiddenRule::Ceil;
    Network alt_net = Network::build(alt, 0);
    const CostReport alt_params = count_params(alt_net);
    std::cout << "ta_overhead_pct_other_convention="
              << alt_params.ta_overhead_pct << "\n";
  }
  const CostReport fl = estimate_flops(
      net, retained_for_proportion(net, PruneKind::Iap,
                                   static_cast<real>(proportion)));
  std::cout << "proportion=" << proportion << " flops_full=" << fl.flops_full
            << " flops_retained=" << fl.flops_retained
            << " flops_reduction_total_pct=" << fl.reduction_total_pct
            << " flops_reduction_guarded_pct=" << fl.reduction_guarded_pct
            << "\n";
  for (const LayerCost& lc : fl.layers) {
    if (lc.params == 0 && lc.ta_params == 0) continue;
    std::cout << "layer=" << lc.name << " params=" << lc.params
              << " ta_params=" << lc.ta_params
              << " macs_per_frame=" << lc.macs_per_frame
              << " retained=" << lc.retained
              << " reduction_pct=" << lc.reduction_pct << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-stream classification with temporal-attention spiking networks"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, ckpt_path;
  std::string strategy, neuron, method = "iap", proportions;
  std::size_t crops = 10, seeds = 5, threads = 1;
  double eps = 1e-5, iap_p = -1, irp_p = -1, proportion = 0;
  std::int64_t seed = -1, epochs = -1;
  int rcs_flag = -1, deterministic_flag = -1;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "experiment config (json)")
      ->required();
  gen->add_option("--out", out_path, "output dataset directory")->required();
  gen->add_option("--seed", seed, "master seed override");

  CLI::App* train = app.add_subcommand("train", "train a network");
  train->add_option("--config", config_path)->required();
  train->add_option("--data", data_dir, "dataset directory");
  train->add_option("--out", out_path, "checkpoint path")->required();
  train->add_option("--strategy", strategy, "S1|S2|S3|S4");
  train->add_option("--neuron", neuron, "lif|liaf");
  train->add_flag("--rcs{1},--no-rcs{0}", rcs_flag,
                  "random start-time augmentation");
  train->add_option("--seed", seed);
  train->add_option("--epochs", epochs);
  train->add_option("--threads", threads);
  train->add_flag("--deterministic{1},--no-deterministic{0}",
                  deterministic_flag);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt_path)->required();
  eval->add_option("--data", data_dir)->required();
  eval->add_option("--crops", crops);
  eval->add_option("--iap", iap_p, "attention pruning proportion");
  eval->add_option("--irp", irp_p, "random pruning proportion");
  eval->add_option("--seeds", seeds, "mask draws for --irp");
  eval->add_option("--seed", seed);
  eval->add_option("--out", out_path, "report file")
      ->default_val("eval_report.csv");
  eval->add_option("--threads", threads);

  CLI::App* sweep = app.add_subcommand("sweep", "pruning proportion sweep");
  sweep->add_option("--ckpt", ckpt_path)->required();
  sweep->add_option("--data", data_dir)->required();
  sweep->add_option("--proportions", proportions, "comma-separated list")
      ->required();
  sweep->add_option("--method", method, "iap|irp");
  sweep->add_option("--seeds", seeds);
  sweep->add_option("--crops", crops);
  sweep->add_option("--out", out_path)->default_val("sweep.csv");
  sweep->add_option("--threads", threads);

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of the analytic gradients");
  gradcheck->add_option("--config", config_path)->required();
  gradcheck->add_option("--eps", eps);

  CLI::App* info = app.add_subcommand("info", "parameter and FLOPs report");
  info->add_option("--ckpt", ckpt_path)->required();
  info->add_option("--proportion", proportion, "assumed pruning proportion");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return run_gen(config_path, out_path, seed);
    if (train->parsed()) {
      return run_train(config_path, data_dir, out_path, strategy, neuron,
                       rcs_flag, seed, epochs, threads, deterministic_flag);
    }
    if (eval->parsed()) {
      return run_eval(ckpt_path, data_dir, crops, iap_p, irp_p, seeds, seed,
                      out_path, threads);
    }
    if (sweep->parsed()) {
      return run_sweep(ckpt_path, data_dir, proportions, method, seeds, crops,
                       out_path, threads);
    }
    if (gradcheck->parsed()) return run_gradcheck(config_path, eps);
    if (info->parsed()) return run_info(ckpt_path, proportion);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
