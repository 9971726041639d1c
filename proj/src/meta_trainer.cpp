#include "mlap/meta_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mlap/kernels.hpp"
#include "mlap/rng.hpp"

namespace mlap {

namespace {

// mix_seed purpose tags; arbitrary distinct values.
constexpr std::uint64_t kTagPriorInit = 101;
constexpr std::uint64_t kTagPhiInit = 102;
constexpr std::uint64_t kTagShuffle = 103;
constexpr std::uint64_t kTagMetaBatch = 104;
constexpr std::uint64_t kTagStepNoise = 105;
constexpr std::uint64_t kTagHyperEps = 106;
constexpr std::uint64_t kTagTaskNoise = 107;
constexpr std::uint64_t kTagEvalHyper = 108;
constexpr std::uint64_t kTagEvalLoss = 109;
constexpr std::uint64_t kTagPriorSample = 110;
constexpr std::uint64_t kTagBoundedLoss = 111;

bool kind_has_env(ObjectiveKind k) {
  return k == ObjectiveKind::McAllester || k == ObjectiveKind::Seeger ||
         k == ObjectiveKind::PentinaLampert;
}

std::size_t min_m_for(ObjectiveKind k) {
  return k == ObjectiveKind::Seeger ? 8 : 2;
}

void validate_task_for_arch(const TaskDataset& t, const NetworkArch& arch) {
  check_dim(t.train.inputs.cols == arch.input_dim(), "task input dim != arch");
  check_dim(t.train.inputs.rows == t.train.labels.size(), "task train batch shape");
  check_dim(t.test.inputs.rows == t.test.labels.size(), "task test batch shape");
  for (int y : t.train.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= arch.output_dim())
      throw std::invalid_argument("task label out of range for arch");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (adam_betas.first < 0.0 || adam_betas.first >= 1.0 ||
      adam_betas.second < 0.0 || adam_betas.second >= 1.0)
    throw std::invalid_argument("TrainConfig: betas must be in [0,1)");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size >= 1");
  if (mc_samples < 1) throw std::invalid_argument("TrainConfig: mc_samples >= 1");
  if (workers < 1) throw std::invalid_argument("TrainConfig: workers >= 1");
  objective.validate();
}

void adam_step(Vec& params, const Vec& grads, OptimizerState& st, double lr,
               std::pair<double, double> betas, double eps) {
  check_dim(params.size() == grads.size() && st.m.size() == params.size() &&
                st.v.size() == params.size(),
            "adam_step: shape mismatch");
  st.step += 1;
  const double b1 = betas.first, b2 = betas.second;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    st.m[k] = b1 * st.m[k] + (1.0 - b1) * g;
    st.v[k] = b2 * st.v[k] + (1.0 - b2) * g * g;
    params[k] -= lr * (st.m[k] / bc1) / (std::sqrt(st.v[k] / bc2) + eps);
  }
}

JointEval joint_eval(const StochasticNet& prior, const std::vector<TaskSlice>& slices,
                     const TrainConfig& cfg, bool include_env,
                     std::uint64_t noise_seed) {
  cfg.validate();
  if (slices.empty()) throw std::invalid_argument("joint_eval: no task slices");
  const std::size_t k = slices.size();
  for (const auto& sl : slices) {
    check_dim(sl.phi != nullptr && sl.batch != nullptr, "joint_eval: null slice");
    check_dim(sl.phi->layers.size() == prior.layers.size(),
              "joint_eval: posterior/prior layer mismatch");
    check_dim(sl.batch->inputs.cols == prior.arch.input_dim(),
              "joint_eval: batch input dim");
    check_dim(sl.batch->inputs.rows == sl.batch->labels.size(),
              "joint_eval: batch shape");
    if (sl.m_full < min_m_for(cfg.objective.kind))
      throw std::invalid_argument("joint_eval: m below objective minimum");
  }

  const Vec theta = flatten(prior);
  StochasticNet prior_tilde = prior;
  if (cfg.hyper_noise) {
    Vec eps(theta.size());
    auto he = make_engine(mix_seed(noise_seed, kTagHyperEps));
    fill_normal(he, eps, 0.0, 1.0);
    Vec tt(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
      tt[i] = theta[i] + cfg.objective.kappa_q * eps[i];
    unflatten(prior_tilde, tt);
  }

  const HyperPosterior hp{theta, cfg.objective.kappa_q, cfg.objective.kappa_p};
  const double klh = hyper_kl(hp, cfg.hyper_form);
  const bool vb = cfg.objective.kind == ObjectiveKind::VB;
  const std::size_t S = cfg.mc_samples;

  struct TaskWork {
    std::vector<ForwardRecord> recs;
    double ce = 0.0;
    double klt = 0.0;
  };
  std::vector<TaskWork> work(k);

  // Phase 1: forwards and per-task stats. Each task draws from its own
  // noise stream, so the result is independent of worker scheduling.
  const long long kk = static_cast<long long>(k);
#pragma omp parallel for num_threads(cfg.workers) schedule(static) if (cfg.workers > 1)
  for (long long ii = 0; ii < kk; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    auto eng = make_engine(mix_seed(noise_seed, kTagTaskNoise, i));
    TaskWork& tw = work[i];
    tw.recs.reserve(S);
    for (std::size_t s = 0; s < S; ++s) {
      tw.recs.push_back(
          forward_stochastic(*slices[i].phi, slices[i].batch->inputs, eng));
      const Vec ps = ce_per_sample(tw.recs.back().logits, slices[i].batch->labels);
      double ce = 0.0;
      for (double v : ps) ce += v;
      tw.ce += ce / static_cast<double>(ps.size());
    }
    tw.ce /= static_cast<double>(S);
    tw.klt = net_kl(*slices[i].phi, prior_tilde);
  }

  // Phase 2: objective value and chain weights.
  std::vector<TaskStats> stats(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double m = static_cast<double>(slices[i].m_full);
    stats[i].m = slices[i].m_full;
    stats[i].emp_err = vb ? m * work[i].ce : work[i].ce;
    stats[i].kl_task = work[i].klt;
    stats[i].kl_hyper = klh;
  }
  const ObjectiveBreakdown br = objective_grad(stats, cfg.objective, include_env);

  // Phase 3: backward per task into private buffers.
  std::vector<NetGrads> g_phi, g_theta_part;
  g_phi.reserve(k);
  g_theta_part.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    g_phi.push_back(make_grads(*slices[i].phi));
    g_theta_part.push_back(make_grads(prior));
  }
#pragma omp parallel for num_threads(cfg.workers) schedule(static) if (cfg.workers > 1)
  for (long long ii = 0; ii < kk; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    const double ce_scale =
        br.d_emp[i] * (vb ? static_cast<double>(slices[i].m_full) : 1.0);
    for (std::size_t s = 0; s < S; ++s) {
      const Mat dl = ce_grad(work[i].recs[s].logits, slices[i].batch->labels,
                             ce_scale / static_cast<double>(S));
      backward(*slices[i].phi, work[i].recs[s], dl, g_phi[i]);
    }
    if (br.d_kl_task[i] != 0.0)
      net_kl_grad(*slices[i].phi, prior_tilde, br.d_kl_task[i], g_phi[i],
                  g_theta_part[i]);
  }

  // Phase 4: fixed-order reduction. theta~ = theta + const, so prior-side KL
  // gradients pass through unchanged.
  JointEval out;
  out.value = br.value;
  out.d_theta.assign(theta.size(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const Vec part = flatten(g_theta_part[i]);
    for (std::size_t j = 0; j < part.size(); ++j) out.d_theta[j] += part[j];
  }
  if (br.d_kl_hyper != 0.0) hyper_kl_grad_theta(hp, br.d_kl_hyper, out.d_theta);
  out.d_phi.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.d_phi.push_back(flatten(g_phi[i]));
  for (std::size_t i = 0; i < k; ++i) {
    out.mean_emp += work[i].ce;
    out.mean_kl_task += work[i].klt;
  }
  out.mean_emp /= static_cast<double>(k);
  out.mean_kl_task /= static_cast<double>(k);
  out.kl_hyper = klh;
  return out;
}

namespace {

/// Per-task cyclic mini-batch source with per-epoch reshuffling.
struct BatchCycler {
  const Batch* full = nullptr;
  std::mt19937_64 eng;
  std::vector<std::size_t> order;

  void reshuffle() { order = shuffle_indices(eng, full->size()); }

  Batch batch_at(std::size_t iter, std::size_t batch_size) const {
    const std::size_t m = full->size();
    const std::size_t nb = (m + batch_size - 1) / batch_size;
    const std::size_t j = iter % nb;
    const std::size_t lo = j * batch_size;
    const std::size_t hi = std::min(lo + batch_size, m);
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                 order.begin() + static_cast<std::ptrdiff_t>(hi));
    return gather(*full, idx);
  }
};

void ensure_finite(double v, const char* where, std::size_t epoch, std::size_t iter,
                   const JointEval& je) {
  if (std::isfinite(v)) return;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s: non-finite objective at epoch %zu iter %zu "
                "(emp=%g kl_task=%g kl_hyper=%g)",
                where, epoch, iter, je.mean_emp, je.mean_kl_task, je.kl_hyper);
  throw std::runtime_error(buf);
}

}  // namespace

MetaTrainResult meta_train(const std::vector<TaskDataset>& tasks,
                           const NetworkArch& arch, const TrainConfig& cfg_in) {
  if (tasks.empty()) throw std::invalid_argument("meta_train: no tasks");
  TrainConfig cfg = cfg_in;
  cfg.objective.n_tasks = tasks.size();
  cfg.validate();
  arch.validate();
  const std::size_t n = tasks.size();
  for (const auto& t : tasks) {
    validate_task_for_arch(t, arch);
    if (t.m() < min_m_for(cfg.objective.kind))
      throw std::invalid_argument("meta_train: task below objective's minimum m");
  }

  MetaTrainResult res;
  res.prior = make_net(arch);
  {
    auto e = make_engine(mix_seed(cfg.seed, kTagPriorInit));
    init_net(res.prior, e);
  }
  res.posteriors.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.posteriors.push_back(make_net(arch));
    auto e = make_engine(mix_seed(cfg.seed, kTagPhiInit, i));
    init_net(res.posteriors[i], e);
  }
  if (cfg.epochs == 0) return res;

  const bool env_kind = kind_has_env(cfg.objective.kind);
  if (env_kind && n == 1)
    std::fprintf(stderr,
                 "[mlap] warning: single training task; environment term "
                 "disabled and the transfer bound is not valid\n");
  const bool include_env = env_kind && n >= 2;

  std::vector<BatchCycler> cyclers(n);
  std::size_t iters = 1;
  for (std::size_t i = 0; i < n; ++i) {
    cyclers[i].full = &tasks[i].train;
    cyclers[i].eng = make_engine(mix_seed(cfg.seed, kTagShuffle, i));
    const std::size_t nb = (tasks[i].m() + cfg.batch_size - 1) / cfg.batch_size;
    iters = std::max(iters, nb);
  }

  const std::size_t nf = res.prior.n_flat();
  OptimizerState opt_theta(nf);
  std::vector<OptimizerState> opt_phi(n, OptimizerState(nf));
  auto meta_eng = make_engine(mix_seed(cfg.seed, kTagMetaBatch));
  const bool subsample = cfg.meta_batch >= 1 && cfg.meta_batch < n;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto& c : cyclers) c.reshuffle();
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t iter = 0; iter < iters; ++iter) {
      std::vector<std::size_t> sel;
      if (subsample)
        sel = sample_distinct(meta_eng, n, cfg.meta_batch);
      else {
        sel.resize(n);
        for (std::size_t i = 0; i < n; ++i) sel[i] = i;
      }
      std::vector<Batch> batches;
      batches.reserve(sel.size());
      for (std::size_t i : sel) batches.push_back(cyclers[i].batch_at(iter, cfg.batch_size));
      std::vector<TaskSlice> slices(sel.size());
      for (std::size_t s = 0; s < sel.size(); ++s)
        slices[s] = {&res.posteriors[sel[s]], &batches[s], tasks[sel[s]].m()};

      const std::uint64_t noise_seed = mix_seed(cfg.seed, kTagStepNoise, epoch, iter);
      const JointEval je = joint_eval(res.prior, slices, cfg, include_env, noise_seed);
      ensure_finite(je.value, "meta_train", epoch, iter, je);

      Vec theta = flatten(res.prior);
      adam_step(theta, je.d_theta, opt_theta, cfg.lr, cfg.adam_betas, cfg.adam_eps);
      unflatten(res.prior, theta);
      for (std::size_t s = 0; s < sel.size(); ++s) {
        Vec phi = flatten(res.posteriors[sel[s]]);
        adam_step(phi, je.d_phi[s], opt_phi[sel[s]], cfg.lr, cfg.adam_betas,
                  cfg.adam_eps);
        unflatten(res.posteriors[sel[s]], phi);
      }
      log.objective += je.value;
      log.emp_err += je.mean_emp;
      log.kl_task += je.mean_kl_task;
      log.kl_hyper += je.kl_hyper;
    }
    const double di = static_cast<double>(iters);
    log.objective /= di;
    log.emp_err /= di;
    log.kl_task /= di;
    log.kl_hyper /= di;
    res.history.push_back(log);
  }
  return res;
}

MetaTestResult meta_test(const StochasticNet& prior, const TaskDataset& task,
                         const TrainConfig& cfg_in) {
  TrainConfig cfg = cfg_in;
  cfg.objective.n_tasks = 1;
  cfg.hyper_noise = false;  // prior used deterministically during adaptation
  cfg.validate();
  validate_task_for_arch(task, prior.arch);
  if (task.m() < min_m_for(cfg.objective.kind))
    throw std::invalid_argument("meta_test: task below objective's minimum m");

  StochasticNet prior_used = prior;
  if (cfg_in.sampled_prior_meta_test) {
    Vec theta = flatten(prior);
    Vec eps(theta.size());
    auto e = make_engine(mix_seed(cfg.seed, kTagPriorSample));
    fill_normal(e, eps, 0.0, 1.0);
    for (std::size_t i = 0; i < theta.size(); ++i)
      theta[i] += cfg.objective.kappa_q * eps[i];
    unflatten(prior_used, theta);
  }

  MetaTestResult res;
  res.posterior = prior;  // phi' <- theta
  if (cfg.epochs == 0) {
    res.test_error =
        error_rate(forward_mean(res.posterior, task.test.inputs), task.test.labels);
    return res;
  }

  BatchCycler cyc;
  cyc.full = &task.train;
  cyc.eng = make_engine(mix_seed(cfg.seed, kTagShuffle, 0));
  const std::size_t iters = (task.m() + cfg.batch_size - 1) / cfg.batch_size;
  OptimizerState opt(prior.n_flat());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    cyc.reshuffle();
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t iter = 0; iter < iters; ++iter) {
      const Batch b = cyc.batch_at(iter, cfg.batch_size);
      const std::vector<TaskSlice> slices{{&res.posterior, &b, task.m()}};
      const std::uint64_t noise_seed = mix_seed(cfg.seed, kTagStepNoise, epoch, iter);
      const JointEval je =
          joint_eval(prior_used, slices, cfg, /*include_env=*/false, noise_seed);
      ensure_finite(je.value, "meta_test", epoch, iter, je);
      Vec phi = flatten(res.posterior);
      adam_step(phi, je.d_phi[0], opt, cfg.lr, cfg.adam_betas, cfg.adam_eps);
      unflatten(res.posterior, phi);
      log.objective += je.value;
      log.emp_err += je.mean_emp;
      log.kl_task += je.mean_kl_task;
      log.kl_hyper += je.kl_hyper;
    }
    const double di = static_cast<double>(iters);
    log.objective /= di;
    log.emp_err /= di;
    log.kl_task /= di;
    log.kl_hyper /= di;
    res.history.push_back(log);
  }
  res.test_error =
      error_rate(forward_mean(res.posterior, task.test.inputs), task.test.labels);
  return res;
}

namespace {

double bounded_batch_loss(const Mat& logits, const std::vector<int>& labels,
                          BoundedLoss kind) {
  if (kind == BoundedLoss::ZeroOne) return error_rate(logits, labels);
  const Vec ps = ce_per_sample(logits, labels);
  double acc = 0.0;
  for (double v : ps) acc += std::min(1.0, v);
  return acc / static_cast<double>(ps.size());
}

}  // namespace

double stochastic_bounded_loss(const StochasticNet& net, const Batch& batch,
                               BoundedLoss loss_kind, std::size_t n_draws,
                               std::uint64_t seed) {
  if (n_draws < 1) throw std::invalid_argument("stochastic_bounded_loss: n_draws");
  auto eng = make_engine(mix_seed(seed, kTagBoundedLoss));
  double acc = 0.0;
  for (std::size_t s = 0; s < n_draws; ++s) {
    const ForwardRecord rec = forward_stochastic(net, batch.inputs, eng);
    acc += bounded_batch_loss(rec.logits, batch.labels, loss_kind);
  }
  return acc / static_cast<double>(n_draws);
}

BoundReport evaluate_bound(const StochasticNet& prior,
                           const std::vector<StochasticNet>& posteriors,
                           const std::vector<TaskDataset>& tasks,
                           const TrainConfig& cfg, ObjectiveKind kind,
                           BoundedLoss loss_kind, std::uint64_t seed) {
  if (posteriors.size() != tasks.size() || tasks.empty())
    throw std::invalid_argument("evaluate_bound: posterior/task count mismatch");
  if (!kind_has_env(kind))
    throw std::invalid_argument("evaluate_bound: kind has no bound form");
  ObjectiveSpec spec = cfg.objective;
  spec.kind = kind;
  spec.n_tasks = tasks.size();
  spec.validate();
  const std::size_t n = tasks.size();
  const std::size_t S = std::max<std::size_t>(1, cfg.eval_mc_samples);

  const Vec theta = flatten(prior);
  const HyperPosterior hp{theta, spec.kappa_q, spec.kappa_p};
  BoundReport rep;
  rep.kl_hyper = hyper_kl(hp, cfg.hyper_form);

  std::vector<double> emp(n, 0.0), klt(n, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    StochasticNet pt = prior;
    if (cfg.hyper_noise) {
      Vec eps(theta.size());
      auto he = make_engine(mix_seed(seed, kTagEvalHyper, s));
      fill_normal(he, eps, 0.0, 1.0);
      Vec tt(theta.size());
      for (std::size_t j = 0; j < theta.size(); ++j)
        tt[j] = theta[j] + spec.kappa_q * eps[j];
      unflatten(pt, tt);
    }
    for (std::size_t i = 0; i < n; ++i) {
      klt[i] += net_kl(posteriors[i], pt);
      auto eng = make_engine(mix_seed(seed, kTagEvalLoss, s, i));
      const ForwardRecord rec =
          forward_stochastic(posteriors[i], tasks[i].train.inputs, eng);
      emp[i] += bounded_batch_loss(rec.logits, tasks[i].train.labels, loss_kind);
    }
  }

  rep.tasks.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    TaskBound& tb = rep.tasks[i];
    tb.m = tasks[i].m();
    tb.emp = emp[i] / static_cast<double>(S);
    tb.kl_task = klt[i] / static_cast<double>(S);
    const TaskStats ts{tb.m, tb.emp, tb.kl_task, rep.kl_hyper};
    switch (kind) {
      case ObjectiveKind::McAllester: tb.complexity = complexity_mcallester(ts, spec); break;
      case ObjectiveKind::Seeger: tb.complexity = complexity_seeger(ts, spec); break;
      case ObjectiveKind::PentinaLampert: tb.complexity = complexity_pl(ts, spec); break;
      default: break;
    }
    acc += tb.emp + tb.complexity;
    rep.mean_emp += tb.emp;
  }
  acc /= static_cast<double>(n);
  rep.mean_emp /= static_cast<double>(n);
  rep.env_valid = n >= 2;
  if (rep.env_valid) {
    rep.env_term = kind == ObjectiveKind::PentinaLampert
                       ? env_complexity_pl(spec, rep.kl_hyper)
                       : env_complexity(spec, rep.kl_hyper);
    acc += rep.env_term;
  }
  rep.total = acc;
  return rep;
}

}  // namespace mlap
