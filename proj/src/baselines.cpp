#include "mlap/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mlap/rng.hpp"

namespace mlap {

namespace {
constexpr std::uint64_t kTagBaseInit = 401;
constexpr std::uint64_t kTagBaseShuffle = 402;

/// Flat-vector entry mask for the listed layers (all four blocks per layer).
std::vector<char> frozen_mask(const StochasticNet& net,
                              const std::vector<std::size_t>& frozen) {
  std::vector<char> mask(net.n_flat(), 0);
  for (std::size_t layer : frozen)
    if (layer >= net.layers.size())
      throw std::invalid_argument("frozen layer index out of range");
  std::size_t at = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::size_t span = 2 * (net.layers[l].w.size() + net.layers[l].b.size());
    const bool f =
        std::find(frozen.begin(), frozen.end(), l) != frozen.end();
    if (f) std::fill(mask.begin() + static_cast<std::ptrdiff_t>(at),
                     mask.begin() + static_cast<std::ptrdiff_t>(at + span), 1);
    at += span;
  }
  return mask;
}

}  // namespace

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::ScratchD: return "scratch-d";
    case BaselineKind::ScratchS: return "scratch-s";
    case BaselineKind::WarmStart: return "warm-start";
    case BaselineKind::OracleFreeze: return "oracle-freeze";
    case BaselineKind::AveragedPrior: return "averaged-prior";
  }
  return "?";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "scratch-d") return BaselineKind::ScratchD;
  if (s == "scratch-s") return BaselineKind::ScratchS;
  if (s == "warm-start") return BaselineKind::WarmStart;
  if (s == "oracle-freeze") return BaselineKind::OracleFreeze;
  if (s == "averaged-prior") return BaselineKind::AveragedPrior;
  throw std::invalid_argument("unknown baseline kind: " + s);
}

void train_deterministic(StochasticNet& net, const TaskDataset& task,
                         const TrainConfig& cfg,
                         const std::vector<std::size_t>& frozen) {
  cfg.validate();
  check_dim(task.train.inputs.cols == net.arch.input_dim(),
            "train_deterministic: input dim");
  const std::vector<char> mask = frozen_mask(net, frozen);
  const std::size_t m = task.m();
  const std::size_t iters = (m + cfg.batch_size - 1) / cfg.batch_size;
  OptimizerState opt(net.n_flat());
  auto shuf_eng = make_engine(mix_seed(cfg.seed, kTagBaseShuffle));
  NetGrads g = make_grads(net);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffle_indices(shuf_eng, m);
    for (std::size_t it = 0; it < iters; ++it) {
      const std::size_t lo = it * cfg.batch_size;
      const std::size_t hi = std::min(lo + cfg.batch_size, m);
      const std::vector<std::size_t> idx(
          order.begin() + static_cast<std::ptrdiff_t>(lo),
          order.begin() + static_cast<std::ptrdiff_t>(hi));
      const Batch b = gather(task.train, idx);
      const ForwardMeanRecord rec = forward_mean_record(net, b.inputs);
      g.zero();
      backward_mean(net, rec, ce_grad(rec.logits, b.labels, 1.0), g);
      Vec flat = flatten(net);
      Vec gflat = flatten(g);
      for (std::size_t k = 0; k < gflat.size(); ++k)
        if (mask[k]) gflat[k] = 0.0;
      adam_step(flat, gflat, opt, cfg.lr, cfg.adam_betas, cfg.adam_eps);
      unflatten(net, flat);
    }
  }
}

BaselineResult run_baseline(const BaselineSpec& spec,
                            const std::vector<TaskDataset>& env_tasks,
                            const TaskDataset& new_task, const NetworkArch& arch,
                            const TrainConfig& cfg) {
  arch.validate();
  BaselineResult res;
  auto fresh = [&]() {
    StochasticNet net = make_net(arch);
    auto e = make_engine(mix_seed(cfg.seed, kTagBaseInit));
    init_net(net, e);
    return net;
  };

  switch (spec.kind) {
    case BaselineKind::ScratchD: {
      res.net = fresh();
      train_deterministic(res.net, new_task, cfg);
      break;
    }
    case BaselineKind::ScratchS: {
      TrainConfig c = cfg;
      c.objective.kind = ObjectiveKind::NoComplexity;
      MetaTestResult mt = meta_test(fresh(), new_task, c);
      res.net = std::move(mt.posterior);
      res.history = std::move(mt.history);
      res.test_error = mt.test_error;
      return res;
    }
    case BaselineKind::WarmStart:
    case BaselineKind::OracleFreeze: {
      if (env_tasks.empty())
        throw std::invalid_argument("baseline: needs at least one training task");
      res.net = fresh();
      // Source task: first by index.
      train_deterministic(res.net, env_tasks.front(), cfg);
      std::vector<std::size_t> frozen;
      if (spec.kind == BaselineKind::OracleFreeze) frozen = spec.frozen_layers;
      train_deterministic(res.net, new_task, cfg, frozen);
      break;
    }
    case BaselineKind::AveragedPrior: {
      if (env_tasks.empty())
        throw std::invalid_argument("baseline: needs at least one training task");
      StochasticNet prior = make_net(arch);
      Vec mean_flat(prior.n_flat(), 0.0);
      for (const auto& t : env_tasks) {
        StochasticNet w = fresh();
        train_deterministic(w, t, cfg);
        const Vec f = flatten(w);
        for (std::size_t k = 0; k < f.size(); ++k) mean_flat[k] += f[k];
      }
      for (double& v : mean_flat) v /= static_cast<double>(env_tasks.size());
      unflatten(prior, mean_flat);
      // Isotropic unit variances around the averaged means.
      for (auto& l : prior.layers) {
        std::fill(l.w.rho.begin(), l.w.rho.end(), 0.0);
        std::fill(l.b.rho.begin(), l.b.rho.end(), 0.0);
      }
      TrainConfig c = cfg;
      c.objective.kind = ObjectiveKind::Seeger;
      MetaTestResult mt = meta_test(prior, new_task, c);
      res.net = std::move(mt.posterior);
      res.history = std::move(mt.history);
      res.test_error = mt.test_error;
      return res;
    }
  }
  res.test_error =
      error_rate(forward_mean(res.net, new_task.test.inputs), new_task.test.labels);
  return res;
}

}  // namespace mlap
