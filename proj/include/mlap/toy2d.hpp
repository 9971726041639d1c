#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mlap/gauss.hpp"
#include "mlap/objectives.hpp"

namespace mlap {

/// 2-D mean-estimation task: squared-Euclidean loss against noisy samples of
/// an unknown center. Every expectation has a closed form, so the whole
/// meta-training objective is exact (no Monte Carlo).
struct ToyTask {
  std::array<double, 2> center{};
  double noise_sd = 0.1;
  std::vector<std::array<double, 2>> samples;

  std::size_t m() const { return samples.size(); }
};

ToyTask gen_toy_task(std::array<double, 2> center, double noise_sd, std::size_t m,
                     std::uint64_t seed);

/// E_{h~q} ||h - z||^2 = ||mu - z||^2 + sigma1^2 + sigma2^2.
double toy_expected_loss(const DiagGaussian& q, const std::array<double, 2>& z);

struct ToyConfig {
  std::vector<std::array<double, 2>> centers{{2.0, 1.0}, {4.0, 1.0}};
  double noise_sd = 0.1;
  std::size_t m = 50;
  std::uint64_t seed = 0;
  std::size_t steps = 4000;
  double lr = 0.02;
  ObjectiveSpec objective;  // must stay McAllester-kind
  HyperKlForm hyper_form = HyperKlForm::DimensionCorrect;
};

/// Exact objective value and analytic gradients for the toy stack.
struct ToyEval {
  double value = 0.0;
  DiagGaussianGrad d_prior;
  std::vector<DiagGaussianGrad> d_post;
  double mean_emp = 0.0;
  double mean_kl_task = 0.0;
  double kl_hyper = 0.0;
};

ToyEval toy_objective(const DiagGaussian& prior,
                      const std::vector<DiagGaussian>& posteriors,
                      const std::vector<ToyTask>& tasks, const ObjectiveSpec& spec,
                      HyperKlForm form);

struct ToyResult {
  DiagGaussian prior;
  std::vector<DiagGaussian> posteriors;
  std::vector<ToyTask> tasks;
  std::vector<double> history;  // objective value per step
};

ToyResult run_toy(const ToyConfig& cfg);

/// Bound value with per-sample expected losses clipped at 1.
struct ToyBoundReport {
  double total = 0.0;
  double env_term = 0.0;
  double kl_hyper = 0.0;
  std::vector<double> emp_clipped;
  std::vector<double> kl_task;
};

ToyBoundReport toy_bound(const DiagGaussian& prior,
                         const std::vector<DiagGaussian>& posteriors,
                         const std::vector<ToyTask>& tasks,
                         const ObjectiveSpec& spec, HyperKlForm form);

}  // namespace mlap
