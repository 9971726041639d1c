#include "mlap/gauss.hpp"

#include <algorithm>
#include <cmath>

#include "mlap/rng.hpp"

namespace mlap {

double clamp_rho(double rho) { return std::clamp(rho, kRhoMin, kRhoMax); }

double sigma2_of_rho(double rho) { return std::exp(clamp_rho(rho)); }

double dsigma2_drho(double rho) {
  if (rho < kRhoMin || rho > kRhoMax) return 0.0;
  return std::exp(rho);
}

double kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p) {
  check_dim(q.mu.size() == q.rho.size() && p.mu.size() == p.rho.size(),
            "kl_diag_gaussian: mu/rho length mismatch");
  check_dim(q.size() == p.size(), "kl_diag_gaussian: dimension mismatch");
  double kl = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double s2q = sigma2_of_rho(q.rho[k]);
    const double s2p = sigma2_of_rho(p.rho[k]);
    const double dmu = q.mu[k] - p.mu[k];
    kl += 0.5 * (std::log(s2p / s2q) + (s2q + dmu * dmu) / s2p - 1.0);
  }
  return kl;
}

void kl_diag_gaussian_grad(const DiagGaussian& q, const DiagGaussian& p, double scale,
                           DiagGaussianGrad& gq, DiagGaussianGrad& gp) {
  check_dim(q.size() == p.size(), "kl_diag_gaussian_grad: dimension mismatch");
  check_dim(gq.d_mu.size() == q.size() && gp.d_mu.size() == p.size(),
            "kl_diag_gaussian_grad: grad buffer size");
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double s2q = sigma2_of_rho(q.rho[k]);
    const double s2p = sigma2_of_rho(p.rho[k]);
    const double dmu = q.mu[k] - p.mu[k];
    gq.d_mu[k] += scale * dmu / s2p;
    gp.d_mu[k] += scale * (-dmu / s2p);
    // dKL/ds2q = (1/s2p - 1/s2q)/2 ; dKL/ds2p = (1/s2p - (s2q+dmu^2)/s2p^2)/2
    gq.d_rho[k] += scale * 0.5 * (1.0 / s2p - 1.0 / s2q) * dsigma2_drho(q.rho[k]);
    gp.d_rho[k] += scale * 0.5 * (1.0 / s2p - (s2q + dmu * dmu) / (s2p * s2p)) *
                   dsigma2_drho(p.rho[k]);
  }
}

double hyper_kl(const HyperPosterior& h, HyperKlForm form) {
  if (!(h.kappa_q > 0.0) || !(h.kappa_p > 0.0))
    throw std::invalid_argument("hyper_kl: kappa_q and kappa_p must be positive");
  double sq = 0.0;
  for (double t : h.theta) sq += t * t;
  const double kq2 = h.kappa_q * h.kappa_q;
  const double kp2 = h.kappa_p * h.kappa_p;
  const double np =
      form == HyperKlForm::DimensionCorrect ? static_cast<double>(h.theta.size()) : 1.0;
  return (sq + np * kq2) / (2.0 * kp2) + np * std::log(h.kappa_p / h.kappa_q) -
         np / 2.0;
}

void hyper_kl_grad_theta(const HyperPosterior& h, double scale, Vec& d_theta) {
  if (!(h.kappa_q > 0.0) || !(h.kappa_p > 0.0))
    throw std::invalid_argument("hyper_kl_grad_theta: kappas must be positive");
  check_dim(d_theta.size() == h.theta.size(), "hyper_kl_grad_theta: buffer size");
  const double inv = scale / (h.kappa_p * h.kappa_p);
  for (std::size_t k = 0; k < h.theta.size(); ++k) d_theta[k] += inv * h.theta[k];
}

Vec sample_reparam(const DiagGaussian& g, const Vec& eps) {
  check_dim(eps.size() == g.size(), "sample_reparam: eps dimension mismatch");
  Vec w(g.size());
  for (std::size_t k = 0; k < g.size(); ++k)
    w[k] = g.mu[k] + std::exp(0.5 * clamp_rho(g.rho[k])) * eps[k];
  return w;
}

McEstimate kl_mc_oracle(const DiagGaussian& q, const DiagGaussian& p,
                        std::size_t n_samples, std::uint64_t seed) {
  check_dim(q.size() == p.size(), "kl_mc_oracle: dimension mismatch");
  if (n_samples < 10000)
    throw std::invalid_argument("kl_mc_oracle: need at least 1e4 samples");
  auto eng = make_engine(seed);
  const std::size_t d = q.size();
  Vec eps(d), w(d);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    fill_normal(eng, eps, 0.0, 1.0);
    double lq = 0.0, lp = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double s2q = sigma2_of_rho(q.rho[k]);
      const double s2p = sigma2_of_rho(p.rho[k]);
      const double wk = q.mu[k] + std::sqrt(s2q) * eps[k];
      const double aq = wk - q.mu[k], ap = wk - p.mu[k];
      lq += -0.5 * (std::log(s2q) + aq * aq / s2q);
      lp += -0.5 * (std::log(s2p) + ap * ap / s2p);
    }
    const double v = lq - lp;
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = (sumsq - n * mean * mean) / (n - 1.0);
  return {mean, std::sqrt(std::max(var, 0.0) / n)};
}

}  // namespace mlap
