#pragma once

#include <cstdint>

#include "mlap/mat.hpp"

namespace mlap {

// rho = log(sigma^2), clamped before exponentiation so sigma^2 stays in a
// numerically safe range. Outside the clamp the derivative is zero.
inline constexpr double kRhoMin = -20.0;
inline constexpr double kRhoMax = 4.0;

double clamp_rho(double rho);
double sigma2_of_rho(double rho);
double dsigma2_drho(double rho);

/// Factorized Gaussian over one parameter block.
struct DiagGaussian {
  Vec mu;
  Vec rho;  // log-variance per entry

  std::size_t size() const { return mu.size(); }
};

/// Gradient accumulator aligned with a DiagGaussian block.
struct DiagGaussianGrad {
  Vec d_mu;
  Vec d_rho;

  explicit DiagGaussianGrad(std::size_t d = 0) : d_mu(d, 0.0), d_rho(d, 0.0) {}
  void resize(std::size_t d) {
    d_mu.assign(d, 0.0);
    d_rho.assign(d, 0.0);
  }
};

/// KL(q || p) for factorized Gaussians, closed form.
double kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p);

/// Accumulates scale * dKL/d(mu,rho) for both the q side and the p side.
void kl_diag_gaussian_grad(const DiagGaussian& q, const DiagGaussian& p, double scale,
                           DiagGaussianGrad& gq, DiagGaussianGrad& gp);

/// Isotropic Gaussian hyper-posterior N(theta, kappa_q^2 I) against the
/// hyper-prior N(0, kappa_p^2 I).
struct HyperPosterior {
  Vec theta;
  double kappa_q = 0.0;
  double kappa_p = 0.0;
};

/// DimensionCorrect is the exact KL between the two isotropic Gaussians in
/// N_P dimensions. Compat drops the N_P factors from the log and constant
/// terms (a per-dimension variant); kept only for A/B comparison.
enum class HyperKlForm { DimensionCorrect, Compat };

double hyper_kl(const HyperPosterior& h,
                HyperKlForm form = HyperKlForm::DimensionCorrect);

/// Accumulates scale * d hyper_kl / d theta (= scale * theta / kappa_p^2,
/// identical for both forms).
void hyper_kl_grad_theta(const HyperPosterior& h, double scale, Vec& d_theta);

/// mu + exp(rho/2) .* eps
Vec sample_reparam(const DiagGaussian& g, const Vec& eps);

struct McEstimate {
  double estimate = 0.0;
  double std_err = 0.0;
};

/// Monte-Carlo estimate of E_{w~q}[log q(w) - log p(w)]; test oracle.
McEstimate kl_mc_oracle(const DiagGaussian& q, const DiagGaussian& p,
                        std::size_t n_samples, std::uint64_t seed);

}  // namespace mlap
