#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlap/toy2d.hpp"

using namespace mlap;

namespace {

double fd_rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max(std::abs(analytic) + std::abs(fd), 1e-3);
}

}  // namespace

TEST_CASE("toy_expected_loss: pinned closed form") {
  // ||mu - z||^2 + s1^2 + s2^2 with mu = (0.3, -0.2), sigma = (0.7, 1.3),
  // z = (1, 0.5): 0.49 + 0.49 + 0.49 + 1.69 = 3.16.
  DiagGaussian q;
  q.mu = {0.3, -0.2};
  q.rho = {std::log(0.49), std::log(1.69)};
  CHECK(toy_expected_loss(q, {1.0, 0.5}) == doctest::Approx(3.16).epsilon(1e-12));
  CHECK_THROWS_AS(toy_expected_loss(DiagGaussian{{0.0}, {0.0}}, {1.0, 0.5}),
                  std::invalid_argument);
}

TEST_CASE("gen_toy_task: determinism, sample statistics, validation") {
  const ToyTask a = gen_toy_task({2.0, 1.0}, 0.1, 200, 7);
  const ToyTask b = gen_toy_task({2.0, 1.0}, 0.1, 200, 7);
  CHECK(a.samples == b.samples);
  const ToyTask c = gen_toy_task({2.0, 1.0}, 0.1, 200, 8);
  CHECK(a.samples != c.samples);

  double m0 = 0.0, m1 = 0.0;
  for (const auto& z : a.samples) {
    m0 += z[0];
    m1 += z[1];
  }
  m0 /= 200.0;
  m1 /= 200.0;
  // Sample mean within 5 standard errors of the center.
  const double se = 0.1 / std::sqrt(200.0);
  CHECK(std::abs(m0 - 2.0) < 5 * se);
  CHECK(std::abs(m1 - 1.0) < 5 * se);

  CHECK_THROWS_AS(gen_toy_task({0.0, 0.0}, 0.1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_toy_task({0.0, 0.0}, 0.0, 10, 1), std::invalid_argument);
}

TEST_CASE("toy_objective: analytic gradients match finite differences") {
  const std::vector<ToyTask> tasks{gen_toy_task({2.0, 1.0}, 0.1, 30, 1),
                                   gen_toy_task({4.0, 1.0}, 0.1, 30, 2)};
  DiagGaussian prior;
  prior.mu = {0.5, -0.3};
  prior.rho = {-1.0, 0.5};
  std::vector<DiagGaussian> post(2);
  post[0].mu = {1.5, 0.8};
  post[0].rho = {-0.5, -2.0};
  post[1].mu = {3.1, 1.2};
  post[1].rho = {0.2, -1.5};

  ObjectiveSpec spec;
  spec.n_tasks = 2;

  const ToyEval ev = toy_objective(prior, post, tasks, spec, HyperKlForm::DimensionCorrect);
  CHECK(std::isfinite(ev.value));
  CHECK(ev.kl_hyper > 0.0);

  const double h = 1e-6;
  auto eval_at = [&](const DiagGaussian& pr, const std::vector<DiagGaussian>& po) {
    return toy_objective(pr, po, tasks, spec, HyperKlForm::DimensionCorrect).value;
  };
  double worst = 0.0;
  auto probe = [&](double* slot, double analytic) {
    const double keep = *slot;
    *slot = keep + h;
    const double fp = eval_at(prior, post);
    *slot = keep - h;
    const double fm = eval_at(prior, post);
    *slot = keep;
    worst = std::max(worst, fd_rel_err(analytic, (fp - fm) / (2 * h)));
  };
  for (std::size_t j = 0; j < 2; ++j) {
    probe(&prior.mu[j], ev.d_prior.d_mu[j]);
    probe(&prior.rho[j], ev.d_prior.d_rho[j]);
    for (std::size_t i = 0; i < 2; ++i) {
      probe(&post[i].mu[j], ev.d_post[i].d_mu[j]);
      probe(&post[i].rho[j], ev.d_post[i].d_rho[j]);
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("run_toy: recovers the environment structure") {
  ToyConfig cfg;  // defaults: centers (2,1) and (4,1), 4000 steps
  cfg.seed = 3;
  const ToyResult res = run_toy(cfg);
  CHECK(res.history.size() == cfg.steps);
  CHECK(res.history.back() < res.history.front());

  // Prior settles between the two task centers.
  CHECK(std::abs(res.prior.mu[0] - 3.0) < 0.5);
  CHECK(std::abs(res.prior.mu[1] - 1.0) < 0.5);
  // Posteriors settle on their own centers.
  CHECK(std::abs(res.posteriors[0].mu[0] - 2.0) < 0.3);
  CHECK(std::abs(res.posteriors[1].mu[0] - 4.0) < 0.3);
  // Task centers differ along coordinate 0 only, so the learned prior keeps
  // substantially more variance there than along coordinate 1.
  CHECK(sigma2_of_rho(res.prior.rho[0]) > 4.0 * sigma2_of_rho(res.prior.rho[1]));
}

TEST_CASE("run_toy rejects non-McAllester objectives and empty centers") {
  ToyConfig cfg;
  cfg.objective.kind = ObjectiveKind::Seeger;
  CHECK_THROWS_AS(run_toy(cfg), std::invalid_argument);
  ToyConfig empty;
  empty.centers.clear();
  CHECK_THROWS_AS(run_toy(empty), std::invalid_argument);
}

TEST_CASE("toy_bound: clipping and majorization") {
  const std::vector<ToyTask> tasks{gen_toy_task({0.0, 0.0}, 0.1, 50, 4),
                                   gen_toy_task({0.2, 0.1}, 0.1, 50, 5)};
  DiagGaussian prior;
  prior.mu = {0.0, 0.0};
  prior.rho = {-3.0, -3.0};
  std::vector<DiagGaussian> post(2, prior);
  post[1].mu = {6.0, 6.0};  // expected loss ~72 on task 2: must clip to 1

  ObjectiveSpec spec;
  spec.n_tasks = 2;
  const ToyBoundReport rep =
      toy_bound(prior, post, tasks, spec, HyperKlForm::DimensionCorrect);
  CHECK(rep.emp_clipped.size() == 2);
  CHECK(rep.emp_clipped[0] < 1.0);
  CHECK(rep.emp_clipped[1] == 1.0);
  CHECK(rep.env_term > 0.0);
  CHECK(rep.kl_task[1] > rep.kl_task[0]);
  const double mean_emp = 0.5 * (rep.emp_clipped[0] + rep.emp_clipped[1]);
  CHECK(rep.total > mean_emp);
}
