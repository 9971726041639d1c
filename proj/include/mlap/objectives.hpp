#pragma once

#include <string>
#include <vector>

#include "mlap/mat.hpp"

namespace mlap {

enum class ObjectiveKind { McAllester, Seeger, PentinaLampert, VB, NoComplexity };

std::string to_string(ObjectiveKind k);
ObjectiveKind objective_kind_from_string(const std::string& s);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::McAllester;
  double delta = 0.1;
  std::size_t n_tasks = 1;
  double kappa_q = 0.001;
  double kappa_p = 2000.0;

  void validate() const;
};

/// Per-task scalar inputs to the objective. For VB, emp_err carries the
/// summed (not averaged) NLL estimate.
struct TaskStats {
  std::size_t m = 0;       // sample count
  double emp_err = 0.0;    // Monte-Carlo empirical error estimate
  double kl_task = 0.0;    // E over hyper-posterior of KL(Q_i || P)
  double kl_hyper = 0.0;
};

// Task-level complexity terms. All throw std::invalid_argument when m is
// below the form's minimum (2, or 8 for Seeger).
double complexity_mcallester(const TaskStats& ts, const ObjectiveSpec& spec);
double complexity_seeger(const TaskStats& ts, const ObjectiveSpec& spec);
double complexity_pl(const TaskStats& ts, const ObjectiveSpec& spec);

/// Environment-level term. Throws for n_tasks < 2 (callers disable the term
/// at n = 1 and warn).
double env_complexity(const ObjectiveSpec& spec, double kl_hyper);
double env_complexity_pl(const ObjectiveSpec& spec, double kl_hyper);

/// Reporting form: (1/n) sum_i (emp_i + task-complexity_i) + env term.
/// Env term is the matching environment complexity (0 when n = 1), kl_hyper
/// for VB, 0 for NoComplexity.
double total_objective(const std::vector<TaskStats>& stats,
                       const ObjectiveSpec& spec);

/// Hierarchical variational form: sum_i (sum_nll_i + kl_task_i) + kl_hyper.
double vb_objective(const std::vector<std::pair<double, double>>& per_task,
                    double kl_hyper);

/// Differentiable view used by the trainer: the objective value plus its
/// partial derivatives w.r.t. each task's emp_err and kl_task and the shared
/// kl_hyper. VB uses the variational (summed) form; the bound kinds use the
/// (1/n)-averaged form with the environment term.
struct ObjectiveBreakdown {
  double value = 0.0;
  std::vector<double> d_emp;
  std::vector<double> d_kl_task;
  double d_kl_hyper = 0.0;
};

ObjectiveBreakdown objective_grad(const std::vector<TaskStats>& stats,
                                  const ObjectiveSpec& spec,
                                  bool include_env = true);

}  // namespace mlap
