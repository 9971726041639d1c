// mlap — meta-learning with PAC-Bayes priors: experiment driver CLI.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "mlap/checkpoint.hpp"
#include "mlap/experiment.hpp"
#include "mlap/gradcheck.hpp"
#include "mlap/report.hpp"
#include "mlap/rng.hpp"
#include "mlap/toy2d.hpp"

namespace fs = std::filesystem;
using namespace mlap;

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  bool fail_fast = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool need_config) {
  auto* c = cmd->add_option("--config", o.config, "experiment config (TOML)");
  if (need_config) c->required();
  cmd->add_option("--out", o.out, "output directory override");
  cmd->add_option("--seed", o.seed, "seed override (single seed)")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--workers", o.workers, "worker threads for per-task loops");
  cmd->add_flag("--fail-fast", o.fail_fast, "stop after the first failed cell");
}

/// Relative IDX paths resolve against $MLAP_CACHE_DIR when it is set.
void resolve_cache_paths(ExperimentConfig& cfg) {
  const char* cache = std::getenv("MLAP_CACHE_DIR");
  if (!cache || cfg.env.base != "idx") return;
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (fs::path(cache) / p).string();
  };
  resolve(cfg.env.idx_images);
  resolve(cfg.env.idx_labels);
}

ExperimentConfig load_cfg(const CommonOpts& o) {
  ExperimentConfig cfg = load_experiment_config(o.config);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.seed_set) cfg.seeds = {o.seed};
  if (o.workers > 0) cfg.train.workers = o.workers;
  if (o.fail_fast) cfg.fail_fast = true;
  resolve_cache_paths(cfg);
  return cfg;
}

NetworkArch arch_from(const ExperimentConfig& cfg, const EnvTasks& env) {
  NetworkArch arch;
  arch.layer_sizes.push_back(env.input_dim);
  for (std::size_t h : cfg.hidden) arch.layer_sizes.push_back(h);
  arch.layer_sizes.push_back(env.n_classes);
  arch.validate();
  return arch;
}

void write_history(const std::string& path, const std::vector<EpochLog>& hist) {
  std::ofstream out(path, std::ios::trunc);
  out << "epoch,objective,emp_err,kl_task,kl_hyper\n";
  char buf[160];
  for (const auto& h : hist) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", h.epoch,
                  h.objective, h.emp_err, h.kl_task, h.kl_hyper);
    out << buf;
  }
}

int cmd_run(const CommonOpts& o) {
  const ExperimentConfig cfg = load_cfg(o);
  const ExperimentResult res = run_experiment(cfg);
  for (const auto& r : res.records)
    std::printf("%-16s seed=%llu n=%zu  test_error=%.4f  %s\n", r.method.c_str(),
                static_cast<unsigned long long>(r.seed), r.n_train_tasks,
                r.test_error, r.status.c_str());
  std::printf("%zu record(s), %zu failed; results under %s\n", res.records.size(),
              res.n_failed, cfg.out_dir.c_str());
  return res.n_failed == 0 ? 0 : 1;
}

int cmd_meta_train(const CommonOpts& o, const std::string& method_name) {
  ExperimentConfig cfg = load_cfg(o);
  const MethodSpec method = parse_method(method_name);
  if (method.is_baseline)
    throw std::invalid_argument("meta-train expects an MLAP objective method, got " +
                                method.name);
  const std::uint64_t seed = cfg.seeds.front();
  const EnvTasks env = build_environment(cfg.env, seed, cfg.env.n_train_tasks);
  const NetworkArch arch = arch_from(cfg, env);

  TrainConfig tcfg = cfg.train;
  tcfg.objective.kind = method.objective;
  tcfg.seed = mix_seed(seed, 504, env.train.size());
  const MetaTrainResult mt = meta_train(env.train, arch, tcfg);

  fs::create_directories(cfg.out_dir);
  save_checkpoint((fs::path(cfg.out_dir) / "prior.json").string(), mt.prior, "prior");
  for (std::size_t i = 0; i < mt.posteriors.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "posterior_%zu.json", i);
    save_checkpoint((fs::path(cfg.out_dir) / name).string(), mt.posteriors[i],
                    "posterior");
  }
  write_history((fs::path(cfg.out_dir) / "train_history.csv").string(), mt.history);

  ObjectiveKind bk = method.objective;
  if (bk == ObjectiveKind::VB || bk == ObjectiveKind::NoComplexity)
    bk = ObjectiveKind::McAllester;
  const BoundReport bound = evaluate_bound(mt.prior, mt.posteriors, env.train, tcfg,
                                           bk, BoundedLoss::ClippedCE,
                                           mix_seed(seed, 506, env.train.size()));
  std::printf("meta-train %s: %zu tasks, final objective %.6f\n", method.name.c_str(),
              env.train.size(), mt.history.back().objective);
  std::printf("transfer bound (%s, clipped CE): %.6f  [emp %.4f, kl_hyper %.4f]\n",
              to_string(bk).c_str(), bound.total, bound.mean_emp, bound.kl_hyper);
  std::printf("checkpoints under %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_meta_test(const CommonOpts& o, const std::string& prior_path,
                  std::size_t task_index) {
  ExperimentConfig cfg = load_cfg(o);
  const StochasticNet prior = load_checkpoint(prior_path);
  const std::uint64_t seed = cfg.seeds.front();
  const EnvTasks env = build_environment(cfg.env, seed, 0);
  if (task_index >= env.test.size())
    throw std::invalid_argument("meta-test: task index out of range");

  TrainConfig tcfg = cfg.train;
  tcfg.epochs = cfg.effective_test_epochs();
  tcfg.seed = mix_seed(seed, 505, task_index);
  const MetaTestResult res = meta_test(prior, env.test[task_index], tcfg);
  std::printf("meta-test task %zu (%s): test error %.4f over %zu samples\n",
              task_index, env.test[task_index].name.c_str(), res.test_error,
              env.test[task_index].test.size());
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    save_checkpoint((fs::path(o.out) / "posterior.json").string(), res.posterior,
                    "posterior");
    write_history((fs::path(o.out) / "test_history.csv").string(), res.history);
  }
  return 0;
}

int cmd_toy(const CommonOpts& o, std::size_t steps, std::size_t m) {
  ToyConfig tc;
  tc.seed = o.seed_set ? o.seed : 0;
  if (steps) tc.steps = steps;
  if (m) tc.m = m;
  const ToyResult res = run_toy(tc);
  const ToyBoundReport bound =
      toy_bound(res.prior, res.posteriors, res.tasks, tc.objective, tc.hyper_form);

  std::printf("toy run: %zu tasks, m=%zu, %zu steps (kappa_p=%g kappa_q=%g delta=%g)\n",
              res.tasks.size(), tc.m, tc.steps, tc.objective.kappa_p,
              tc.objective.kappa_q, tc.objective.delta);
  std::printf("prior:  mu=(%.4f, %.4f)  sigma=(%.4f, %.4f)\n", res.prior.mu[0],
              res.prior.mu[1], std::sqrt(sigma2_of_rho(res.prior.rho[0])),
              std::sqrt(sigma2_of_rho(res.prior.rho[1])));
  for (std::size_t i = 0; i < res.posteriors.size(); ++i) {
    const auto& q = res.posteriors[i];
    std::printf("task %zu: center=(%.2f, %.2f)  post mu=(%.4f, %.4f)\n", i,
                res.tasks[i].center[0], res.tasks[i].center[1], q.mu[0], q.mu[1]);
  }
  std::printf("bound (clipped): %.6f  [env %.4f, kl_hyper %.4f]\n", bound.total,
              bound.env_term, bound.kl_hyper);

  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream out(fs::path(o.out) / "toy.csv", std::ios::trunc);
    out << "entity,mu1,mu2,sigma1,sigma2\n";
    char buf[200];
    std::snprintf(buf, sizeof buf, "prior,%.17g,%.17g,%.17g,%.17g\n", res.prior.mu[0],
                  res.prior.mu[1], std::sqrt(sigma2_of_rho(res.prior.rho[0])),
                  std::sqrt(sigma2_of_rho(res.prior.rho[1])));
    out << buf;
    for (std::size_t i = 0; i < res.posteriors.size(); ++i) {
      const auto& q = res.posteriors[i];
      std::snprintf(buf, sizeof buf, "posterior_%zu,%.17g,%.17g,%.17g,%.17g\n", i,
                    q.mu[0], q.mu[1], std::sqrt(sigma2_of_rho(q.rho[0])),
                    std::sqrt(sigma2_of_rho(q.rho[1])));
      out << buf;
    }
  }
  return 0;
}

int cmd_gradcheck(const CommonOpts& o, std::size_t trials, double tol) {
  const GradCheckReport rep = gradcheck_joint(trials, o.seed_set ? o.seed : 1);
  for (std::size_t i = 0; i < rep.cases.size(); ++i)
    std::printf("case %2zu %-16s params=%zu  max_rel_err=%.3e\n", i,
                rep.cases[i].objective.c_str(), rep.cases[i].n_params,
                rep.cases[i].max_rel_err);
  std::printf("gradcheck: %zu cases, max relative error %.3e (tolerance %.1e)\n",
              rep.cases.size(), rep.max_rel_err, tol);
  return rep.max_rel_err < tol ? 0 : 1;
}

int cmd_bound_eval(const std::string& kind_name, std::size_t m, std::size_t n,
                   double emp, double kl_task, double kl_hyper, double delta) {
  ObjectiveSpec spec;
  spec.kind = objective_kind_from_string(kind_name);
  spec.delta = delta;
  spec.n_tasks = n;
  const TaskStats ts{m, emp, kl_task, kl_hyper};
  double complexity = 0.0;
  switch (spec.kind) {
    case ObjectiveKind::McAllester: complexity = complexity_mcallester(ts, spec); break;
    case ObjectiveKind::Seeger: complexity = complexity_seeger(ts, spec); break;
    case ObjectiveKind::PentinaLampert: complexity = complexity_pl(ts, spec); break;
    default:
      throw std::invalid_argument("bound-eval: kind must be mcallester, seeger or pl");
  }
  double env = 0.0;
  if (n >= 2)
    env = spec.kind == ObjectiveKind::PentinaLampert
              ? env_complexity_pl(spec, kl_hyper)
              : env_complexity(spec, kl_hyper);
  std::printf("task complexity: %.17g\n", complexity);
  std::printf("env term:        %.17g%s\n", env, n >= 2 ? "" : "  (n = 1: omitted)");
  std::printf("emp + task + env: %.17g\n", emp + complexity + env);
  return 0;
}

int cmd_report(const CommonOpts& o) {
  std::string dir = o.out;
  if (dir.empty() && !o.config.empty())
    dir = load_experiment_config(o.config).out_dir;
  if (dir.empty())
    throw std::invalid_argument("report: pass --out RESULTS_DIR or --config");
  const ReportSummary sum = emit_report(dir);
  std::printf("report over %zu record(s) (%zu failed):\n", sum.n_records, sum.n_failed);
  for (const auto& [method, trend] : sum.trend)
    std::printf("  %-16s trend: %s\n", method.c_str(), trend.c_str());
  std::printf("wrote trend.csv, layer_profile.csv, table1.csv under %s\n", dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlap: PAC-Bayes meta-learning of neural network priors"};
  app.require_subcommand(1);

  CommonOpts run_o, train_o, test_o, toy_o, grad_o, report_o;

  auto* run = app.add_subcommand("run", "run a full experiment grid from a config");
  add_common(run, run_o, true);

  auto* mtrain = app.add_subcommand("meta-train", "meta-train a prior on the "
                                    "config's environment");
  add_common(mtrain, train_o, true);
  std::string method_name = "mlap-s";
  mtrain->add_option("--objective", method_name, "mlap-m|mlap-s|mlap-pl|mlap-vb|mlap-nc");

  auto* mtest = app.add_subcommand("meta-test", "adapt a saved prior to a fresh task");
  add_common(mtest, test_o, true);
  std::string prior_path;
  std::size_t task_index = 0;
  mtest->add_option("--prior", prior_path, "prior checkpoint path")->required();
  mtest->add_option("--task", task_index, "meta-test task index");

  auto* toy = app.add_subcommand("toy", "2-D mean-estimation example with exact "
                                 "objective");
  add_common(toy, toy_o, false);
  std::size_t toy_steps = 0, toy_m = 0;
  toy->add_option("--steps", toy_steps, "optimizer steps");
  toy->add_option("--samples", toy_m, "samples per task");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(grad, grad_o, false);
  std::size_t trials = 20;
  double tol = 1e-5;
  grad->add_option("--trials", trials, "number of random instances");
  grad->add_option("--tol", tol, "max relative error tolerance");

  auto* beval = app.add_subcommand("bound-eval", "bound calculator from scalar "
                                   "inputs (no training)");
  std::string bk_kind = "mcallester";
  std::size_t bk_m = 0, bk_n = 1;
  double bk_emp = 0.0, bk_klt = 0.0, bk_klh = 0.0, bk_delta = 0.1;
  beval->add_option("--kind", bk_kind, "mcallester|seeger|pl");
  beval->add_option("--m", bk_m, "samples per task")->required();
  beval->add_option("--n-tasks", bk_n, "number of tasks");
  beval->add_option("--emp", bk_emp, "empirical bounded loss");
  beval->add_option("--kl-task", bk_klt, "task-level KL");
  beval->add_option("--kl-hyper", bk_klh, "hyper-level KL");
  beval->add_option("--delta", bk_delta, "confidence parameter");

  auto* report = app.add_subcommand("report", "emit tables from a results directory");
  add_common(report, report_o, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_o);
    if (mtrain->parsed()) return cmd_meta_train(train_o, method_name);
    if (mtest->parsed()) return cmd_meta_test(test_o, prior_path, task_index);
    if (toy->parsed()) return cmd_toy(toy_o, toy_steps, toy_m);
    if (grad->parsed()) return cmd_gradcheck(grad_o, trials, tol);
    if (beval->parsed())
      return cmd_bound_eval(bk_kind, bk_m, bk_n, bk_emp, bk_klt, bk_klh, bk_delta);
    if (report->parsed()) return cmd_report(report_o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
