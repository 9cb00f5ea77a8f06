#pragma once

#include <string>
#include <vector>

#include "tasnn/trainer.hpp"

namespace tasnn {

struct LayerCost {
  std::string name;
  std::size_t params = 0;
  std::size_t ta_params = 0;
  std::size_t macs_per_frame = 0;
  std::size_t ta_flops = 0;   // per forward, statistic sum + excitation
  std::size_t retained = 0;   // frames whose weighted op runs
  bool guarded = false;       // a pruning mode can shrink `retained`
  double reduction_pct = 0;   // per-layer, relative to all T frames
};

// Parameter and FLOPs accounting. Convention: one multiply-accumulate is two
// FLOPs; pooling and pointwise activations are free; the attention modules
// always process all T statistics, so their cost never shrinks.
struct CostReport {
  std::vector<LayerCost> layers;
  std::size_t total_params = 0;
  std::size_t ta_params = 0;
  double ta_overhead_pct = 0;  // ta / non-ta * 100
  std::size_t flops_full = 0;
  std::size_t flops_retained = 0;
  double reduction_total_pct = 0;    // over everything incl. TA cost
  double reduction_guarded_pct = 0;  // over the guarded weighted layers only
};

CostReport count_params(const Network& net);

// retained_per_weighted: frames kept per weighted layer, in layer order
CostReport estimate_flops(const Network& net,
                          const std::vector<std::size_t>& retained_per_weighted);

// retained counts implied by pruning proportion p: T - floor(p*T) at every
// guarded layer, T elsewhere
std::vector<std::size_t> retained_for_proportion(const Network& net,
                                                 PruneKind prune, real p);

struct SweepPoint {
  double proportion = 0;
  double accuracy_mean = 0;
  double accuracy_std = 0;
  double flops_reduction_pct = 0;  // guarded-layer reduction
};

// Evaluates the trained network at each proportion; IRP points average over
// `seeds` mask draws.
std::vector<SweepPoint> pruning_sweep(const Network& net, const Dataset& data,
                                      const AggregationConfig& agg,
                                      const std::vector<double>& proportions,
                                      PruneKind method, std::size_t seeds,
                                      std::size_t n_crops = 10,
                                      std::size_t threads = 1);

// header: proportion,accuracy_mean,accuracy_std,flops_reduction_pct
void write_sweep_csv(const std::vector<SweepPoint>& points,
                     const std::string& path);

}  // namespace tasnn
