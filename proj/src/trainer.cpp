#include "tasnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <omp.h>

#include "tasnn/optimizer.hpp"

namespace tasnn {

void TrainConfig::validate() const {
  // lr = 0 is allowed and freezes the optimizer
  if (!(lr >= 0)) throw ConfigError("learning rate must be >= 0");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

bool net_has_dropout(const Network& net) {
  for (const Block& b : net.blocks()) {
    if (b.desc.kind == LayerDesc::Kind::Dropout) return true;
  }
  return false;
}

// weighted blocks whose frames a pruning mode can suppress: the TA-guarded
// ones, or only the input layer under random pruning
std::vector<std::size_t> guarded_weighted_blocks(const Network& net,
                                                 PruneKind prune) {
  std::vector<std::size_t> out;
  std::size_t widx = 0;
  for (const Block& b : net.blocks()) {
    if (!b.desc.weighted()) continue;
    const bool guarded = prune == PruneKind::Irp ? b.weighted_index == 0
                                                 : b.ta.has_value();
    if (guarded) out.push_back(widx);
    ++widx;
  }
  return out;
}

}  // namespace

History train_network(Network& net, const Dataset& train_set,
                      const Dataset& eval_set, const AggregationConfig& agg,
                      const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  agg.validate();
  if (train_set.samples.empty()) throw DataError("training set is empty");
  // batch-level parallelism owns the threads; kernels stay serial inside it
  omp_set_num_threads(static_cast<int>(cfg.threads));

  const bool dropout = net_has_dropout(net);
  Adam adam(net.parameters(), {cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon});
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));

  const std::size_t n = train_set.samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));

  History history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double epoch_loss = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t bsz = std::min(cfg.batch, n - start);
      std::vector<std::vector<Tensor>> grads(bsz);
      std::vector<double> losses(bsz, 0);
#pragma omp parallel for schedule(static) num_threads(cfg.threads)
      for (std::size_t bi = 0; bi < bsz; ++bi) {
        const std::size_t s = order[start + bi];
        const Sample& sample = train_set.samples[s];
        FrameTensor frames = [&] {
          if (cfg.use_rcs) {
            Rng rcs_rng(derive_seed(cfg.seed, "rcs", epoch, s));
            return rcs_sample(sample.stream, agg.dt_us, agg.T, rcs_rng);
          }
          return aggregate(sample.stream, agg);
        }();
        Network local = net;
        local.zero_grads();
        Rng drop_rng(derive_seed(cfg.seed, "dropout", epoch, s));
        losses[bi] = local.loss_and_backward(
            frames, static_cast<std::size_t>(sample.label), cfg.loss,
            dropout ? &drop_rng : nullptr);
        std::vector<Tensor> g;
        for (Tensor* t : local.gradients()) g.push_back(*t);
        grads[bi] = std::move(g);
      }
      // sample-ordered reduction keeps results independent of thread count
      net.zero_grads();
      std::vector<Tensor*> acc = net.gradients();
      for (std::size_t bi = 0; bi < bsz; ++bi) {
        for (std::size_t gi = 0; gi < acc.size(); ++gi) {
          acc[gi]->add_scaled(grads[bi][gi], real(1));
        }
        epoch_loss += losses[bi];
      }
      const real scale = real(1) / static_cast<real>(bsz);
      for (Tensor* g : acc) {
        for (std::size_t j = 0; j < g->size(); ++j) (*g)[j] *= scale;
      }
      adam.step(acc);
    }
    epoch_loss /= static_cast<double>(n);

    EvalConfig ec;
    ec.n_crops = 1;
    ec.threads = cfg.threads;
    const EvalResult ev = evaluate_network(net, eval_set, agg, ec);
    history.push_back({epoch_loss, ev.accuracy});
    if (log) {
      (*log) << "epoch=" << (epoch + 1) << " train_loss=" << epoch_loss
             << " eval_acc=" << ev.accuracy << "\n";
      log->flush();
    }
  }
  return history;
}

EvalResult evaluate_network(const Network& net, const Dataset& data,
                            const AggregationConfig& agg,
                            const EvalConfig& cfg) {
  agg.validate();
  if (cfg.n_crops < 1) throw ConfigError("n_crops must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (cfg.p < 0 || cfg.p > 1) throw ConfigError("pruning proportion in [0,1]");
  omp_set_num_threads(static_cast<int>(cfg.threads));
  if (cfg.prune == PruneKind::Iap && net.ta_param_count() == 0) {
    throw ConfigError("attention pruning needs a network with TA modules");
  }

  const std::size_t n = data.samples.size();
  const std::size_t classes = net.spec().classes;
  std::vector<int> status(n, 0);  // 1 correct, 0 wrong, -1 skipped
  std::vector<double> retained(n, 1.0);

  const std::vector<std::size_t> guarded =
      guarded_weighted_blocks(net, cfg.prune);

#pragma omp parallel num_threads(cfg.threads)
  {
    Network local = net;
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      const Sample& sample = data.samples[i];
      std::vector<FrameTensor> crops;
      try {
        crops = test_crops(sample.stream, agg.dt_us, agg.T, cfg.n_crops);
      } catch (const DataError&) {
        status[i] = -1;
        continue;
      }
      std::vector<real> votes(classes, 0);
      double exec_frac = 0;
      for (std::size_t ci = 0; ci < crops.size(); ++ci) {
        PruneContext prune;
        prune.kind = cfg.prune;
        prune.p = cfg.p;
        Rng irp_rng(derive_seed(cfg.seed, "irp", i, ci));
        if (cfg.prune == PruneKind::Irp) prune.rng = &irp_rng;
        const Tensor outputs =
            local.forward(crops[ci], RunMode::Infer,
                          cfg.prune == PruneKind::None ? nullptr : &prune);
        const std::vector<real> r = rate_readout(outputs);
        for (std::size_t k = 0; k < classes; ++k) votes[k] += r[k];
        if (!guarded.empty()) {
          std::size_t executed = 0;
          for (const std::size_t w : guarded) {
            executed += local.last_executed_frames()[w];
          }
          exec_frac += static_cast<double>(executed) /
                       static_cast<double>(guarded.size() * net.spec().T);
        } else {
          exec_frac += 1.0;
        }
      }
      retained[i] = exec_frac / static_cast<double>(crops.size());
      status[i] =
          argmax_index(votes) == static_cast<std::size_t>(sample.label) ? 1
                                                                        : 0;
    }
  }

  EvalResult res;
  res.per_class_accuracy.assign(data.classes ? data.classes : classes, 0);
  res.per_class_total.assign(res.per_class_accuracy.size(), 0);
  std::vector<std::size_t> per_class_hit(res.per_class_accuracy.size(), 0);
  std::size_t correct = 0;
  double retained_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (status[i] < 0) {
      ++res.skipped;
      continue;
    }
    ++res.evaluated;
    retained_sum += retained[i];
    const std::size_t label = static_cast<std::size_t>(data.samples[i].label);
    if (label < res.per_class_total.size()) ++res.per_class_total[label];
    if (status[i] == 1) {
      ++correct;
      if (label < per_class_hit.size()) ++per_class_hit[label];
    }
  }
  res.accuracy = res.evaluated
                     ? static_cast<double>(correct) /
                           static_cast<double>(res.evaluated)
                     : 0.0;
  for (std::size_t k = 0; k < per_class_hit.size(); ++k) {
    res.per_class_accuracy[k] =
        res.per_class_total[k]
            ? static_cast<double>(per_class_hit[k]) /
                  static_cast<double>(res.per_class_total[k])
            : 0.0;
  }
  res.mean_frames_retained =
      res.evaluated ? retained_sum / static_cast<double>(res.evaluated) : 1.0;
  return res;
}

GradCheckResult gradient_check(Network& net, const FrameTensor& frames,
                               std::size_t label, double eps, LossKind loss) {
  net.zero_grads();
  net.loss_and_backward(frames, label, loss);
  std::vector<Tensor> analytic;
  for (Tensor* g : net.gradients()) analytic.push_back(*g);

  const std::vector<std::string> names = net.parameter_names();
  GradCheckResult res;
  std::vector<Tensor*> params = net.parameters();
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const real saved = p[j];
      p[j] = saved + static_cast<real>(eps);
      const real lp =
          net.loss_value(net.forward(frames, RunMode::Train), label, loss);
      p[j] = saved - static_cast<real>(eps);
      const real lm =
          net.loss_value(net.forward(frames, RunMode::Train), label, loss);
      p[j] = saved;
      const double fd = (double(lp) - double(lm)) / (2 * eps);
      const double an = double(analytic[pi][j]);
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      const double rel = std::abs(fd - an) / denom;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.location = names[pi] + "[" + std::to_string(j) + "]";
      }
    }
  }
  return res;
}

}  // namespace tasnn
