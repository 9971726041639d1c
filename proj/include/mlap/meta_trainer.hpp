#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mlap/dataset.hpp"
#include "mlap/gauss.hpp"
#include "mlap/objectives.hpp"
#include "mlap/stochnet.hpp"

namespace mlap {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  std::pair<double, double> adam_betas{0.9, 0.999};
  double adam_eps = 1e-8;
  std::size_t mc_samples = 1;       // noise draws per optimization step
  std::size_t eval_mc_samples = 8;  // hyper-posterior draws for bound evaluation
  std::size_t meta_batch = 0;       // tasks per iteration; 0 = all
  std::uint64_t seed = 0;
  ObjectiveSpec objective;
  HyperKlForm hyper_form = HyperKlForm::DimensionCorrect;
  bool hyper_noise = true;  // sample theta~ = theta + kappa_q*eps each step
  bool sampled_prior_meta_test = false;
  int workers = 1;

  void validate() const;
};

struct OptimizerState {
  Vec m, v;
  std::uint64_t step = 0;

  explicit OptimizerState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Standard Adam update with bias correction.
void adam_step(Vec& params, const Vec& grads, OptimizerState& st, double lr,
               std::pair<double, double> betas, double eps);

struct EpochLog {
  std::size_t epoch = 0;
  double objective = 0.0;  // mean step objective over the epoch
  double emp_err = 0.0;    // mean training CE across tasks
  double kl_task = 0.0;
  double kl_hyper = 0.0;
};

/// One task's slice of a joint evaluation: its posterior, the mini-batch to
/// evaluate, and the full dataset size (the bound constants use m_full).
struct TaskSlice {
  const StochasticNet* phi = nullptr;
  const Batch* batch = nullptr;
  std::size_t m_full = 0;
};

/// Joint objective value and gradients w.r.t. the prior center theta and each
/// posterior, with all noise derived from noise_seed. Re-evaluating with the
/// same seed and slices freezes the noise, making this a deterministic
/// function of the parameters (used by the finite-difference checks).
struct JointEval {
  double value = 0.0;
  Vec d_theta;              // flat, length prior.n_flat()
  std::vector<Vec> d_phi;   // flat, aligned with slices
  double mean_emp = 0.0;    // mean CE across slices (raw, unscaled)
  double mean_kl_task = 0.0;
  double kl_hyper = 0.0;
};

JointEval joint_eval(const StochasticNet& prior, const std::vector<TaskSlice>& slices,
                     const TrainConfig& cfg, bool include_env,
                     std::uint64_t noise_seed);

struct MetaTrainResult {
  StochasticNet prior;
  std::vector<StochasticNet> posteriors;
  std::vector<EpochLog> history;
};

/// Joint meta-training of the prior center and all task posteriors.
MetaTrainResult meta_train(const std::vector<TaskDataset>& tasks,
                           const NetworkArch& arch, const TrainConfig& cfg);

struct MetaTestResult {
  StochasticNet posterior;
  double test_error = 0.0;  // mean-forward error on the task's test split
  std::vector<EpochLog> history;
};

/// Adaptation to a new task from a fixed prior: phi' starts at theta and the
/// single-task objective (n = 1 constants, no environment term) is minimized.
MetaTestResult meta_test(const StochasticNet& prior, const TaskDataset& task,
                         const TrainConfig& cfg);

enum class BoundedLoss { ClippedCE, ZeroOne };

struct TaskBound {
  std::size_t m = 0;
  double emp = 0.0;      // bounded-loss estimate on the training set
  double kl_task = 0.0;  // MC average over hyper-posterior draws
  double complexity = 0.0;
};

struct BoundReport {
  double kl_hyper = 0.0;
  double env_term = 0.0;
  bool env_valid = false;  // false when n = 1 (term undefined, reported as 0)
  double mean_emp = 0.0;
  double total = 0.0;  // transfer-risk bound value
  std::vector<TaskBound> tasks;
};

/// Evaluates the transfer bound for given prior/posteriors with bounded
/// per-sample losses, averaging cfg.eval_mc_samples hyper-posterior draws.
BoundReport evaluate_bound(const StochasticNet& prior,
                           const std::vector<StochasticNet>& posteriors,
                           const std::vector<TaskDataset>& tasks,
                           const TrainConfig& cfg, ObjectiveKind kind,
                           BoundedLoss loss_kind, std::uint64_t seed);

/// Stochastic-posterior bounded loss on an arbitrary batch (test-side analog
/// of the bound's empirical term).
double stochastic_bounded_loss(const StochasticNet& net, const Batch& batch,
                               BoundedLoss loss_kind, std::size_t n_draws,
                               std::uint64_t seed);

}  // namespace mlap
