#include "mlap/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mlap/rng.hpp"

namespace mlap {

namespace {

constexpr std::uint64_t kTagGradTrial = 601;

double rel_err(double a, double fd) {
  return std::fabs(a - fd) / std::max(std::fabs(a) + std::fabs(fd), 1e-2);
}

Batch random_batch(std::mt19937_64& eng, std::size_t n, std::size_t dim,
                   std::size_t classes) {
  Batch b;
  b.inputs = Mat(n, dim);
  fill_uniform(eng, b.inputs.data, 0.0, 1.0);
  std::uniform_int_distribution<int> lab(0, static_cast<int>(classes) - 1);
  b.labels.resize(n);
  for (auto& y : b.labels) y = lab(eng);
  return b;
}

}  // namespace

GradCheckReport gradcheck_joint(std::size_t n_trials, std::uint64_t seed,
                                double fd_step) {
  const ObjectiveKind kinds[] = {ObjectiveKind::McAllester, ObjectiveKind::Seeger,
                                 ObjectiveKind::PentinaLampert, ObjectiveKind::VB,
                                 ObjectiveKind::NoComplexity};
  // 102 differentiated scalars across the prior and both posteriors: small
  // enough that full central differencing stays cheap and well-conditioned.
  const NetworkArch arch{{2, 3, 2}};
  constexpr std::size_t n_tasks = 2, batch_n = 8, m_full = 64;

  GradCheckReport rep;
  for (std::size_t t = 0; t < n_trials; ++t) {
    auto eng = make_engine(mix_seed(seed, kTagGradTrial, t));

    TrainConfig cfg;
    cfg.objective.kind = kinds[t % std::size(kinds)];
    cfg.objective.n_tasks = n_tasks;
    cfg.objective.kappa_p = 50.0;
    cfg.objective.kappa_q = 0.01;
    cfg.mc_samples = 1 + t % 2;
    cfg.hyper_noise = true;

    StochasticNet prior = make_net(arch);
    init_net(prior, eng);
    // Posteriors start near the prior (as in training). Independent inits
    // would put mu differences of O(1) over sigma^2 = e^-10 into the task
    // KLs, inflating the objective to ~1e5 and drowning small-gradient
    // coordinates in finite-difference roundoff.
    std::vector<StochasticNet> phis(n_tasks, make_net(arch));
    for (auto& p : phis) {
      Vec f = flatten(prior);
      Vec jitter(f.size());
      fill_uniform(eng, jitter, -0.02, 0.02);
      for (std::size_t j = 0; j < f.size(); ++j) f[j] += jitter[j];
      unflatten(p, f);
    }
    std::vector<Batch> batches;
    for (std::size_t i = 0; i < n_tasks; ++i)
      batches.push_back(random_batch(eng, batch_n, arch.input_dim(), arch.output_dim()));

    const std::uint64_t noise_seed = mix_seed(seed, kTagGradTrial, t, 7);
    const std::size_t d = prior.n_flat();

    auto eval = [&](const Vec& x) {
      StochasticNet pr = prior;
      std::vector<StochasticNet> ps = phis;
      unflatten(pr, Vec(x.begin(), x.begin() + d));
      std::vector<TaskSlice> slices(n_tasks);
      for (std::size_t i = 0; i < n_tasks; ++i) {
        unflatten(ps[i], Vec(x.begin() + d * (i + 1), x.begin() + d * (i + 2)));
        slices[i] = TaskSlice{&ps[i], &batches[i], m_full};
      }
      return joint_eval(pr, slices, cfg, /*include_env=*/true, noise_seed);
    };

    Vec x0 = flatten(prior);
    for (const auto& p : phis) {
      const Vec f = flatten(p);
      x0.insert(x0.end(), f.begin(), f.end());
    }
    const JointEval je = eval(x0);
    Vec analytic = je.d_theta;
    for (const auto& g : je.d_phi) analytic.insert(analytic.end(), g.begin(), g.end());

    double worst = 0.0;
    for (std::size_t jx = 0; jx < x0.size(); ++jx) {
      const double h = fd_step * std::max(1.0, std::fabs(x0[jx]));
      Vec xp = x0, xm = x0;
      xp[jx] += h;
      xm[jx] -= h;
      const double fd = (eval(xp).value - eval(xm).value) / (2.0 * h);
      worst = std::max(worst, rel_err(analytic[jx], fd));
    }
    rep.cases.push_back({to_string(cfg.objective.kind), x0.size(), worst});
    rep.max_rel_err = std::max(rep.max_rel_err, worst);
  }
  return rep;
}

}  // namespace mlap
