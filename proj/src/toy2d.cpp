#include "mlap/toy2d.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mlap/meta_trainer.hpp"
#include "mlap/rng.hpp"

namespace mlap {

namespace {
constexpr std::uint64_t kTagToySamples = 301;

Vec flat_params(const DiagGaussian& g) { return {g.mu[0], g.mu[1], g.rho[0], g.rho[1]}; }
}  // namespace

ToyTask gen_toy_task(std::array<double, 2> center, double noise_sd, std::size_t m,
                     std::uint64_t seed) {
  if (m < 2) throw std::invalid_argument("gen_toy_task: m >= 2 required");
  if (!(noise_sd > 0.0)) throw std::invalid_argument("gen_toy_task: noise_sd > 0");
  ToyTask t;
  t.center = center;
  t.noise_sd = noise_sd;
  t.samples.resize(m);
  auto eng = make_engine(mix_seed(seed, kTagToySamples));
  Vec noise(2);
  for (std::size_t i = 0; i < m; ++i) {
    fill_normal(eng, noise, 0.0, noise_sd);
    t.samples[i] = {center[0] + noise[0], center[1] + noise[1]};
  }
  return t;
}

double toy_expected_loss(const DiagGaussian& q, const std::array<double, 2>& z) {
  check_dim(q.size() == 2, "toy_expected_loss: need d = 2");
  const double d0 = q.mu[0] - z[0], d1 = q.mu[1] - z[1];
  return d0 * d0 + d1 * d1 + sigma2_of_rho(q.rho[0]) + sigma2_of_rho(q.rho[1]);
}

ToyEval toy_objective(const DiagGaussian& prior,
                      const std::vector<DiagGaussian>& posteriors,
                      const std::vector<ToyTask>& tasks, const ObjectiveSpec& spec,
                      HyperKlForm form) {
  check_dim(prior.size() == 2, "toy_objective: prior dimension");
  check_dim(posteriors.size() == tasks.size() && !tasks.empty(),
            "toy_objective: posterior/task count");
  const std::size_t n = tasks.size();

  const HyperPosterior hp{flat_params(prior), spec.kappa_q, spec.kappa_p};
  const double klh = hyper_kl(hp, form);

  std::vector<TaskStats> stats(n);
  for (std::size_t i = 0; i < n; ++i) {
    check_dim(posteriors[i].size() == 2, "toy_objective: posterior dimension");
    double emp = 0.0;
    for (const auto& z : tasks[i].samples) emp += toy_expected_loss(posteriors[i], z);
    emp /= static_cast<double>(tasks[i].m());
    stats[i] = {tasks[i].m(), emp, kl_diag_gaussian(posteriors[i], prior), klh};
  }
  const ObjectiveBreakdown br = objective_grad(stats, spec, /*include_env=*/n >= 2);

  ToyEval out;
  out.value = br.value;
  out.kl_hyper = klh;
  out.d_prior.resize(2);
  out.d_post.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.d_post[i].resize(2);
    // empirical term: d/dmu = 2(mu - mean z), d/dsigma2 = 1 per coordinate
    const double m = static_cast<double>(tasks[i].m());
    double zb0 = 0.0, zb1 = 0.0;
    for (const auto& z : tasks[i].samples) {
      zb0 += z[0];
      zb1 += z[1];
    }
    zb0 /= m;
    zb1 /= m;
    const double w = br.d_emp[i];
    out.d_post[i].d_mu[0] += w * 2.0 * (posteriors[i].mu[0] - zb0);
    out.d_post[i].d_mu[1] += w * 2.0 * (posteriors[i].mu[1] - zb1);
    out.d_post[i].d_rho[0] += w * dsigma2_drho(posteriors[i].rho[0]);
    out.d_post[i].d_rho[1] += w * dsigma2_drho(posteriors[i].rho[1]);
    if (br.d_kl_task[i] != 0.0)
      kl_diag_gaussian_grad(posteriors[i], prior, br.d_kl_task[i], out.d_post[i],
                            out.d_prior);
    out.mean_emp += stats[i].emp_err;
    out.mean_kl_task += stats[i].kl_task;
  }
  out.mean_emp /= static_cast<double>(n);
  out.mean_kl_task /= static_cast<double>(n);
  if (br.d_kl_hyper != 0.0) {
    Vec d_theta(4, 0.0);
    hyper_kl_grad_theta(hp, br.d_kl_hyper, d_theta);
    out.d_prior.d_mu[0] += d_theta[0];
    out.d_prior.d_mu[1] += d_theta[1];
    out.d_prior.d_rho[0] += d_theta[2];
    out.d_prior.d_rho[1] += d_theta[3];
  }
  return out;
}

ToyResult run_toy(const ToyConfig& cfg) {
  if (cfg.objective.kind != ObjectiveKind::McAllester)
    throw std::invalid_argument("run_toy: objective must be McAllester");
  if (cfg.centers.empty()) throw std::invalid_argument("run_toy: no task centers");
  ObjectiveSpec spec = cfg.objective;
  spec.n_tasks = cfg.centers.size();
  spec.validate();

  ToyResult res;
  for (std::size_t i = 0; i < cfg.centers.size(); ++i)
    res.tasks.push_back(
        gen_toy_task(cfg.centers[i], cfg.noise_sd, cfg.m, mix_seed(cfg.seed, 1, i)));
  res.prior = DiagGaussian{{0.0, 0.0}, {-10.0, -10.0}};
  res.posteriors.assign(cfg.centers.size(), DiagGaussian{{0.0, 0.0}, {-10.0, -10.0}});

  const std::size_t n = res.posteriors.size();
  const std::size_t np = 4 * (n + 1);
  Vec params(np);
  auto pack = [&]() {
    std::size_t at = 0;
    auto put = [&](const DiagGaussian& g) {
      params[at++] = g.mu[0];
      params[at++] = g.mu[1];
      params[at++] = g.rho[0];
      params[at++] = g.rho[1];
    };
    put(res.prior);
    for (const auto& p : res.posteriors) put(p);
  };
  auto unpack = [&]() {
    std::size_t at = 0;
    auto get = [&](DiagGaussian& g) {
      g.mu[0] = params[at++];
      g.mu[1] = params[at++];
      g.rho[0] = params[at++];
      g.rho[1] = params[at++];
    };
    get(res.prior);
    for (auto& p : res.posteriors) get(p);
  };

  OptimizerState opt(np);
  Vec grads(np);
  res.history.reserve(cfg.steps);
  pack();
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const ToyEval ev =
        toy_objective(res.prior, res.posteriors, res.tasks, spec, cfg.hyper_form);
    if (!std::isfinite(ev.value))
      throw std::runtime_error("run_toy: non-finite objective");
    res.history.push_back(ev.value);
    std::size_t at = 0;
    auto put = [&](const DiagGaussianGrad& g) {
      grads[at++] = g.d_mu[0];
      grads[at++] = g.d_mu[1];
      grads[at++] = g.d_rho[0];
      grads[at++] = g.d_rho[1];
    };
    put(ev.d_prior);
    for (const auto& g : ev.d_post) put(g);
    adam_step(params, grads, opt, cfg.lr, {0.9, 0.999}, 1e-8);
    unpack();
  }
  return res;
}

ToyBoundReport toy_bound(const DiagGaussian& prior,
                         const std::vector<DiagGaussian>& posteriors,
                         const std::vector<ToyTask>& tasks,
                         const ObjectiveSpec& spec, HyperKlForm form) {
  check_dim(posteriors.size() == tasks.size() && !tasks.empty(),
            "toy_bound: posterior/task count");
  ObjectiveSpec sp = spec;
  sp.n_tasks = tasks.size();
  sp.validate();
  const std::size_t n = tasks.size();
  ToyBoundReport rep;
  rep.kl_hyper = hyper_kl({flat_params(prior), sp.kappa_q, sp.kappa_p}, form);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double emp = 0.0;
    for (const auto& z : tasks[i].samples)
      emp += std::min(1.0, toy_expected_loss(posteriors[i], z));
    emp /= static_cast<double>(tasks[i].m());
    const double klt = kl_diag_gaussian(posteriors[i], prior);
    const TaskStats ts{tasks[i].m(), emp, klt, rep.kl_hyper};
    acc += emp + complexity_mcallester(ts, sp);
    rep.emp_clipped.push_back(emp);
    rep.kl_task.push_back(klt);
  }
  acc /= static_cast<double>(n);
  if (n >= 2) {
    rep.env_term = env_complexity(sp, rep.kl_hyper);
    acc += rep.env_term;
  }
  rep.total = acc;
  return rep;
}

}  // namespace mlap
