#include "tasnn/metrics.hpp"

#include <cmath>
#include <fstream>

namespace tasnn {

namespace {

std::string block_name(const Block& b, std::size_t idx) {
  std::string tag;
  switch (b.desc.kind) {
    case LayerDesc::Kind::MaxPool:
      tag = "MP" + std::to_string(b.desc.arg);
      break;
    case LayerDesc::Kind::AvgPool:
      tag = "AP" + std::to_string(b.desc.arg);
      break;
    case LayerDesc::Kind::Conv:
      tag = std::to_string(b.desc.arg) + "C" + std::to_string(b.desc.kernel);
      break;
    case LayerDesc::Kind::Linear:
      tag = std::to_string(b.desc.arg) + "FC";
      break;
    case LayerDesc::Kind::Dropout:
      tag = "DO";
      break;
  }
  return "b" + std::to_string(idx) + ":" + tag;
}

std::size_t ta_module_flops(const Block& b, std::size_t T) {
  if (!b.ta) return 0;
  // statistic sum over every frame element + two matvecs at 2 FLOPs per MAC
  return T * b.in_size() + 4 * T * b.ta->m();
}

CostReport base_report(const Network& net) {
  CostReport rep;
  const std::size_t T = net.spec().T;
  for (std::size_t i = 0; i < net.blocks().size(); ++i) {
    const Block& b = net.blocks()[i];
    LayerCost lc;
    lc.name = block_name(b, i);
    if (b.desc.weighted()) {
      lc.params = b.params.weights.size() +
                  (b.params.has_bias() ? b.params.bias.size() : 0);
      lc.macs_per_frame = b.macs_per_frame();
      lc.retained = T;
    }
    if (b.ta) {
      lc.ta_params = b.ta->param_count();
      lc.ta_flops = ta_module_flops(b, T);
      lc.guarded = true;
    }
    rep.layers.push_back(lc);
    rep.total_params += lc.params + lc.ta_params;
    rep.ta_params += lc.ta_params;
  }
  const std::size_t plain = rep.total_params - rep.ta_params;
  rep.ta_overhead_pct =
      plain ? 100.0 * static_cast<double>(rep.ta_params) /
                  static_cast<double>(plain)
            : 0.0;
  return rep;
}

}  // namespace

CostReport count_params(const Network& net) { return base_report(net); }

CostReport estimate_flops(const Network& net,
                          const std::vector<std::size_t>& retained_per_weighted) {
  CostReport rep = base_report(net);
  const std::size_t T = net.spec().T;
  std::size_t widx = 0;
  std::size_t guarded_full = 0, guarded_ret = 0;
  for (std::size_t i = 0; i < net.blocks().size(); ++i) {
    const Block& b = net.blocks()[i];
    LayerCost& lc = rep.layers[i];
    if (b.desc.weighted()) {
      if (widx >= retained_per_weighted.size()) {
        throw ConfigError("estimate_flops: retained counts missing for layer " +
                          lc.name);
      }
      const std::size_t r = retained_per_weighted[widx];
      if (r > T) {
        throw ConfigError("estimate_flops: retained " + std::to_string(r) +
                          " exceeds T=" + std::to_string(T));
      }
      lc.retained = r;
      lc.reduction_pct =
          100.0 * (1.0 - static_cast<double>(r) / static_cast<double>(T));
      const std::size_t full = 2 * lc.macs_per_frame * T + lc.ta_flops;
      const std::size_t ret = 2 * lc.macs_per_frame * r + lc.ta_flops;
      rep.flops_full += full;
      rep.flops_retained += ret;
      if (r < T) {
        guarded_full += 2 * lc.macs_per_frame * T;
        guarded_ret += 2 * lc.macs_per_frame * r;
      }
      ++widx;
    }
  }
  rep.reduction_total_pct =
      rep.flops_full ? 100.0 * (1.0 - static_cast<double>(rep.flops_retained) /
                                          static_cast<double>(rep.flops_full))
                     : 0.0;
  rep.reduction_guarded_pct =
      guarded_full ? 100.0 * (1.0 - static_cast<double>(guarded_ret) /
                                        static_cast<double>(guarded_full))
                   : 0.0;
  return rep;
}

std::vector<std::size_t> retained_for_proportion(const Network& net,
                                                 PruneKind prune, real p) {
  const std::size_t T = net.spec().T;
  const std::size_t kept = T - drop_count(T, p);
  std::vector<std::size_t> retained;
  for (const Block& b : net.blocks()) {
    if (!b.desc.weighted()) continue;
    const bool guarded = prune == PruneKind::Irp ? b.weighted_index == 0
                                                 : b.ta.has_value();
    retained.push_back(prune == PruneKind::None || !guarded ? T : kept);
  }
  return retained;
}

std::vector<SweepPoint> pruning_sweep(const Network& net, const Dataset& data,
                                      const AggregationConfig& agg,
                                      const std::vector<double>& proportions,
                                      PruneKind method, std::size_t seeds,
                                      std::size_t n_crops,
                                      std::size_t threads) {
  if (method == PruneKind::Irp && seeds < 1) {
    throw ConfigError("IRP sweep needs at least one seed");
  }
  std::vector<SweepPoint> points;
  for (const double p : proportions) {
    SweepPoint pt;
    pt.proportion = p;
    std::vector<double> accs;
    const std::size_t runs = method == PruneKind::Irp ? seeds : 1;
    for (std::size_t s = 0; s < runs; ++s) {
      EvalConfig ec;
      ec.n_crops = n_crops;
      ec.prune = p == 0.0 ? PruneKind::None : method;
      ec.p = static_cast<real>(p);
      ec.seed = derive_seed(0x5eedULL, "sweep", s);
      ec.threads = threads;
      accs.push_back(evaluate_network(net, data, agg, ec).accuracy);
    }
    double mean = 0;
    for (const double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0;
    for (const double a : accs) var += (a - mean) * (a - mean);
    pt.accuracy_mean = mean;
    pt.accuracy_std =
        accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1))
                        : 0.0;
    const CostReport rep = estimate_flops(
        net, retained_for_proportion(net, method, static_cast<real>(p)));
    pt.flops_reduction_pct = rep.reduction_guarded_pct;
    points.push_back(pt);
  }
  return points;
}

void write_sweep_csv(const std::vector<SweepPoint>& points,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "proportion,accuracy_mean,accuracy_std,flops_reduction_pct\n";
  for (const SweepPoint& p : points) {
    out << p.proportion << "," << p.accuracy_mean << "," << p.accuracy_std
        << "," << p.flops_reduction_pct << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace tasnn
