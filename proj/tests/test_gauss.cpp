#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mlap/gauss.hpp"
#include "mlap/rng.hpp"

using namespace mlap;

namespace {

DiagGaussian random_gauss(std::mt19937_64& eng, std::size_t d) {
  DiagGaussian g;
  g.mu.resize(d);
  g.rho.resize(d);
  fill_uniform(eng, g.mu, -2.0, 2.0);
  fill_uniform(eng, g.rho, -3.0, 1.0);
  return g;
}

}  // namespace

TEST_CASE("rho clamp and derivative") {
  CHECK(clamp_rho(0.0) == 0.0);
  CHECK(clamp_rho(-25.0) == kRhoMin);
  CHECK(clamp_rho(9.0) == kRhoMax);
  CHECK(sigma2_of_rho(0.0) == doctest::Approx(1.0));
  CHECK(sigma2_of_rho(-25.0) == doctest::Approx(std::exp(kRhoMin)));
  // dsigma2/drho = sigma2 inside the clamp, 0 strictly outside.
  CHECK(dsigma2_drho(0.0) == doctest::Approx(1.0));
  CHECK(dsigma2_drho(-2.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(dsigma2_drho(kRhoMax + 0.5) == 0.0);
  CHECK(dsigma2_drho(kRhoMin - 0.5) == 0.0);
}

TEST_CASE("kl closed form pinned values") {
  // d=1: q = N(1,1), p = N(0,1)
  const DiagGaussian q1{{1.0}, {0.0}};
  const DiagGaussian p1{{0.0}, {0.0}};
  CHECK(kl_diag_gaussian(q1, p1) == doctest::Approx(0.5).epsilon(1e-14));

  // d=2: q = N(0,I), p = N(0,4I)
  const double rho4 = std::log(4.0);
  const DiagGaussian q2{{0.0, 0.0}, {0.0, 0.0}};
  const DiagGaussian p2{{0.0, 0.0}, {rho4, rho4}};
  CHECK(kl_diag_gaussian(q2, p2) ==
        doctest::Approx(0.6362943611198906).epsilon(1e-14));
}

TEST_CASE("kl is zero at q == p and nonnegative in general") {
  auto eng = make_engine(11);
  for (int c = 0; c < 50; ++c) {
    const DiagGaussian q = random_gauss(eng, 1 + c % 4);
    CHECK(kl_diag_gaussian(q, q) == doctest::Approx(0.0).epsilon(1e-13));
    const DiagGaussian p = random_gauss(eng, q.size());
    CHECK(kl_diag_gaussian(q, p) >= -1e-12);
  }
}

TEST_CASE("kl gradients match finite differences on both sides") {
  auto eng = make_engine(12);
  const std::size_t d = 3;
  DiagGaussian q = random_gauss(eng, d);
  DiagGaussian p = random_gauss(eng, d);
  DiagGaussianGrad gq(d), gp(d);
  const double scale = 1.7;
  kl_diag_gaussian_grad(q, p, scale, gq, gp);

  const double h = 1e-6;
  auto fd = [&](double* coord) {
    *coord += h;
    const double up = kl_diag_gaussian(q, p);
    *coord -= 2 * h;
    const double dn = kl_diag_gaussian(q, p);
    *coord += h;
    return scale * (up - dn) / (2 * h);
  };
  for (std::size_t i = 0; i < d; ++i) {
    CHECK(gq.d_mu[i] == doctest::Approx(fd(&q.mu[i])).epsilon(1e-6));
    CHECK(gq.d_rho[i] == doctest::Approx(fd(&q.rho[i])).epsilon(1e-6));
    CHECK(gp.d_mu[i] == doctest::Approx(fd(&p.mu[i])).epsilon(1e-6));
    CHECK(gp.d_rho[i] == doctest::Approx(fd(&p.rho[i])).epsilon(1e-6));
  }
}

TEST_CASE("kl grad accumulates with the chain weight") {
  auto eng = make_engine(13);
  DiagGaussian q = random_gauss(eng, 2), p = random_gauss(eng, 2);
  DiagGaussianGrad a(2), b(2), dummy(2);
  kl_diag_gaussian_grad(q, p, 1.0, a, dummy);
  kl_diag_gaussian_grad(q, p, 2.5, b, dummy);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(b.d_mu[i] == doctest::Approx(2.5 * a.d_mu[i]));
}

TEST_CASE("hyper_kl pinned values") {
  // N_P=1, theta=(2), kappa_q=kappa_p=1
  CHECK(hyper_kl({{2.0}, 1.0, 1.0}) == doctest::Approx(2.0).epsilon(1e-14));
  // N_P=2, theta=(1,1), kappa_q=.5, kappa_p=2
  const HyperPosterior h2{{1.0, 1.0}, 0.5, 2.0};
  CHECK(hyper_kl(h2) == doctest::Approx(2.085088722239781).epsilon(1e-14));
  CHECK(hyper_kl(h2, HyperKlForm::Compat) ==
        doctest::Approx(1.1675443611198906).epsilon(1e-14));
}

TEST_CASE("hyper_kl rejects non-positive scales") {
  CHECK_THROWS_AS(hyper_kl({{1.0}, 0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(hyper_kl({{1.0}, 1.0, -2.0}), std::invalid_argument);
}

TEST_CASE("hyper_kl theta gradient") {
  const HyperPosterior h{{1.0, -3.0, 0.5}, 0.1, 2.0};
  Vec g(3, 0.0);
  hyper_kl_grad_theta(h, 2.0, g);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(g[i] == doctest::Approx(2.0 * h.theta[i] / 4.0).epsilon(1e-14));

  // FD agreement, and the gradient is identical under the compat form.
  const double h_fd = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    HyperPosterior up = h, dn = h;
    up.theta[i] += h_fd;
    dn.theta[i] -= h_fd;
    const double fd = (hyper_kl(up) - hyper_kl(dn)) / (2 * h_fd);
    const double fd_compat = (hyper_kl(up, HyperKlForm::Compat) -
                              hyper_kl(dn, HyperKlForm::Compat)) /
                             (2 * h_fd);
    CHECK(g[i] / 2.0 == doctest::Approx(fd).epsilon(1e-6));
    CHECK(g[i] / 2.0 == doctest::Approx(fd_compat).epsilon(1e-6));
  }
}

TEST_CASE("sample_reparam applies mu + sigma*eps") {
  const DiagGaussian g{{1.0, -2.0}, {0.0, std::log(4.0)}};
  const Vec eps{0.5, -1.0};
  const Vec w = sample_reparam(g, eps);
  CHECK(w[0] == doctest::Approx(1.5));
  CHECK(w[1] == doctest::Approx(-4.0));
}

TEST_CASE("mc oracle enforces the sample-count floor") {
  const DiagGaussian g{{0.0}, {0.0}};
  CHECK_THROWS_AS(kl_mc_oracle(g, g, 100, 1), std::invalid_argument);
}

TEST_CASE("mc oracle brackets the closed form") {
  auto eng = make_engine(14);
  for (int c = 0; c < 20; ++c) {
    const DiagGaussian q = random_gauss(eng, 1 + c % 3);
    const DiagGaussian p = random_gauss(eng, q.size());
    const double exact = kl_diag_gaussian(q, p);
    const McEstimate mc = kl_mc_oracle(q, p, 20000, 1000 + c);
    CHECK(std::fabs(mc.estimate - exact) <= 3.0 * mc.std_err);
  }
}
