#pragma once

#include <string>

#include "tasnn/metrics.hpp"
#include "tasnn/network.hpp"
#include "tasnn/synth.hpp"

namespace tasnn {

// Everything an experiment needs, resolved from a JSON document with strict
// schema checking (unknown keys are rejected). Defaults follow the gesture
// setup: u_th 0.3, leak 0.3, r 16, lr 1e-4, batch 36, epochs 100.
struct ExperimentConfig {
  std::string data_dir;

  AggregationConfig agg{1000, 60, 0};

  std::string structure = "Input-MP4-64C3-128C3-AP2-128C3-AP2-256FC-11";
  TAStrategy strategy = TAStrategy::S3;
  NeuronConfig neuron;  // mode LIF, u_th 0.3, leak 0.3, width 1.0
  std::size_t ta_r = 16;
  TAHiddenRule ta_hidden = TAHiddenRule::Ceil;
  real ta_d_th = 0;
  bool ta_squeeze_prepool = false;
  bool bias = true;

  TrainConfig train;

  std::size_t eval_crops = 10;
  PruneKind eval_pruning = PruneKind::None;
  real eval_proportion = 0;
  std::size_t irp_seeds = 5;

  SynthConfig synth = SynthConfig::defaults();
  double train_fraction = 2.0 / 3.0;

  void validate() const;
  // geometry comes from the dataset
  NetworkSpec network_spec(std::size_t in_c, std::size_t in_h,
                           std::size_t in_w) const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

// full resolved document; parsing it again yields the identical config
std::string config_to_json(const ExperimentConfig& cfg, bool pretty = false);

const char* strategy_name(TAStrategy s);
TAStrategy strategy_from_name(const std::string& name);

}  // namespace tasnn
