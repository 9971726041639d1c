#include "mlap/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace mlap {

std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::McAllester: return "mcallester";
    case ObjectiveKind::Seeger: return "seeger";
    case ObjectiveKind::PentinaLampert: return "pentina-lampert";
    case ObjectiveKind::VB: return "vb";
    case ObjectiveKind::NoComplexity: return "no-complexity";
  }
  return "?";
}

ObjectiveKind objective_kind_from_string(const std::string& s) {
  if (s == "mcallester") return ObjectiveKind::McAllester;
  if (s == "seeger") return ObjectiveKind::Seeger;
  if (s == "pentina-lampert" || s == "pl") return ObjectiveKind::PentinaLampert;
  if (s == "vb") return ObjectiveKind::VB;
  if (s == "no-complexity" || s == "none") return ObjectiveKind::NoComplexity;
  throw std::invalid_argument("unknown objective kind: " + s);
}

void ObjectiveSpec::validate() const {
  if (!(delta > 0.0) || delta > 1.0)
    throw std::invalid_argument("ObjectiveSpec: delta must be in (0,1]");
  if (n_tasks < 1) throw std::invalid_argument("ObjectiveSpec: n_tasks >= 1");
  if (!(kappa_q > 0.0) || !(kappa_p > 0.0))
    throw std::invalid_argument("ObjectiveSpec: kappas must be positive");
}

namespace {

double mca_arg(const TaskStats& ts, const ObjectiveSpec& spec) {
  const double n = static_cast<double>(spec.n_tasks);
  const double m = static_cast<double>(ts.m);
  return ts.kl_hyper + ts.kl_task + std::log(2.0 * n * m / spec.delta);
}

double seeger_eps(const TaskStats& ts, const ObjectiveSpec& spec) {
  const double m = static_cast<double>(ts.m);
  const double delta_i = spec.delta / (2.0 * static_cast<double>(spec.n_tasks));
  return (ts.kl_hyper + ts.kl_task + std::log(2.0 * std::sqrt(m) / delta_i)) / m;
}

}  // namespace

double complexity_mcallester(const TaskStats& ts, const ObjectiveSpec& spec) {
  spec.validate();
  if (ts.m < 2) throw std::invalid_argument("complexity_mcallester: m >= 2 required");
  return std::sqrt(mca_arg(ts, spec) / (2.0 * (static_cast<double>(ts.m) - 1.0)));
}

double complexity_seeger(const TaskStats& ts, const ObjectiveSpec& spec) {
  spec.validate();
  if (ts.m < 8) throw std::invalid_argument("complexity_seeger: m >= 8 required");
  const double eps = seeger_eps(ts, spec);
  return 2.0 * eps + std::sqrt(2.0 * eps * ts.emp_err);
}

double complexity_pl(const TaskStats& ts, const ObjectiveSpec& spec) {
  spec.validate();
  if (ts.m < 2) throw std::invalid_argument("complexity_pl: m >= 2 required");
  return mca_arg(ts, spec) / std::sqrt(2.0 * (static_cast<double>(ts.m) - 1.0));
}

double env_complexity(const ObjectiveSpec& spec, double kl_hyper) {
  spec.validate();
  if (spec.n_tasks < 2)
    throw std::invalid_argument("env_complexity: n_tasks >= 2 required");
  const double n = static_cast<double>(spec.n_tasks);
  return std::sqrt((kl_hyper + std::log(2.0 * n / spec.delta)) / (2.0 * (n - 1.0)));
}

double env_complexity_pl(const ObjectiveSpec& spec, double kl_hyper) {
  spec.validate();
  if (spec.n_tasks < 2)
    throw std::invalid_argument("env_complexity_pl: n_tasks >= 2 required");
  const double n = static_cast<double>(spec.n_tasks);
  return (kl_hyper + std::log(2.0 * n / spec.delta)) / std::sqrt(2.0 * (n - 1.0));
}

double total_objective(const std::vector<TaskStats>& stats,
                       const ObjectiveSpec& spec) {
  spec.validate();
  if (stats.size() != spec.n_tasks)
    throw std::invalid_argument("total_objective: stats count != n_tasks");
  const double n = static_cast<double>(stats.size());
  double acc = 0.0;
  for (const auto& ts : stats) {
    double c = 0.0;
    switch (spec.kind) {
      case ObjectiveKind::McAllester: c = complexity_mcallester(ts, spec); break;
      case ObjectiveKind::Seeger: c = complexity_seeger(ts, spec); break;
      case ObjectiveKind::PentinaLampert: c = complexity_pl(ts, spec); break;
      case ObjectiveKind::VB: c = ts.kl_task; break;
      case ObjectiveKind::NoComplexity: c = 0.0; break;
    }
    acc += ts.emp_err + c;
  }
  acc /= n;
  const double klh = stats.front().kl_hyper;
  switch (spec.kind) {
    case ObjectiveKind::McAllester:
    case ObjectiveKind::Seeger:
      if (spec.n_tasks >= 2) acc += env_complexity(spec, klh);
      break;
    case ObjectiveKind::PentinaLampert:
      if (spec.n_tasks >= 2) acc += env_complexity_pl(spec, klh);
      break;
    case ObjectiveKind::VB: acc += klh; break;
    case ObjectiveKind::NoComplexity: break;
  }
  return acc;
}

double vb_objective(const std::vector<std::pair<double, double>>& per_task,
                    double kl_hyper) {
  if (kl_hyper < 0.0) throw std::invalid_argument("vb_objective: negative kl_hyper");
  double acc = kl_hyper;
  for (const auto& [sum_nll, kl_task] : per_task) {
    if (kl_task < 0.0) throw std::invalid_argument("vb_objective: negative kl_task");
    acc += sum_nll + kl_task;
  }
  return acc;
}

ObjectiveBreakdown objective_grad(const std::vector<TaskStats>& stats,
                                  const ObjectiveSpec& spec, bool include_env) {
  spec.validate();
  if (stats.empty() || stats.size() > spec.n_tasks)
    throw std::invalid_argument("objective_grad: stats count must be in [1, n_tasks]");
  // stats may be a uniform task subsample (meta-batching); constants use the
  // full n_tasks, averages use the subset size.
  const std::size_t k = stats.size();
  const double inv_n = 1.0 / static_cast<double>(k);
  ObjectiveBreakdown out;
  out.d_emp.assign(k, 0.0);
  out.d_kl_task.assign(k, 0.0);

  if (spec.kind == ObjectiveKind::VB) {
    // Variational form: sum_i (sum_nll_i + kl_task_i) + kl_hyper, with the
    // task sum rescaled by n/k under subsampling.
    const double scale =
        static_cast<double>(spec.n_tasks) / static_cast<double>(k);
    double acc = stats.front().kl_hyper;
    for (std::size_t i = 0; i < k; ++i) {
      acc += scale * (stats[i].emp_err + stats[i].kl_task);
      out.d_emp[i] = scale;
      out.d_kl_task[i] = scale;
    }
    out.value = acc;
    out.d_kl_hyper = 1.0;
    return out;
  }

  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const TaskStats& ts = stats[i];
    out.d_emp[i] = inv_n;
    switch (spec.kind) {
      case ObjectiveKind::NoComplexity: break;
      case ObjectiveKind::McAllester: {
        const double c = complexity_mcallester(ts, spec);
        const double denom = 2.0 * (static_cast<double>(ts.m) - 1.0);
        // c = sqrt(A/denom) => dc/dA = 1/(2*sqrt(A*denom))
        const double dA = 1.0 / (2.0 * std::sqrt(mca_arg(ts, spec) * denom));
        acc += c;
        out.d_kl_task[i] = inv_n * dA;
        out.d_kl_hyper += inv_n * dA;
        break;
      }
      case ObjectiveKind::Seeger: {
        if (ts.m < 8)
          throw std::invalid_argument("objective_grad: Seeger needs m >= 8");
        const double eps = seeger_eps(ts, spec);
        const double emp = std::max(ts.emp_err, 1e-12);  // sqrt-term derivative guard
        acc += 2.0 * eps + std::sqrt(2.0 * eps * ts.emp_err);
        const double dc_deps = 2.0 + std::sqrt(emp / (2.0 * eps));
        const double deps_dkl = 1.0 / static_cast<double>(ts.m);
        out.d_emp[i] += inv_n * std::sqrt(eps / (2.0 * emp));
        out.d_kl_task[i] = inv_n * dc_deps * deps_dkl;
        out.d_kl_hyper += inv_n * dc_deps * deps_dkl;
        break;
      }
      case ObjectiveKind::PentinaLampert: {
        const double dA = 1.0 / std::sqrt(2.0 * (static_cast<double>(ts.m) - 1.0));
        acc += complexity_pl(ts, spec);
        out.d_kl_task[i] = inv_n * dA;
        out.d_kl_hyper += inv_n * dA;
        break;
      }
      case ObjectiveKind::VB: break;  // handled above
    }
    acc += ts.emp_err;
  }
  acc *= inv_n;

  if (include_env && spec.n_tasks >= 2) {
    const double klh = stats.front().kl_hyper;
    const double nn = static_cast<double>(spec.n_tasks);
    switch (spec.kind) {
      case ObjectiveKind::McAllester:
      case ObjectiveKind::Seeger: {
        const double u = env_complexity(spec, klh);
        acc += u;
        // u = sqrt(B/D), D = 2(n-1) => du/dB = 1/(2*u*D)
        out.d_kl_hyper += 1.0 / (2.0 * u * 2.0 * (nn - 1.0));
        break;
      }
      case ObjectiveKind::PentinaLampert:
        acc += env_complexity_pl(spec, klh);
        out.d_kl_hyper += 1.0 / std::sqrt(2.0 * (nn - 1.0));
        break;
      default: break;
    }
  }
  out.value = acc;
  return out;
}

}  // namespace mlap
