#include "mlap/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "mlap/checkpoint.hpp"
#include "mlap/rng.hpp"

namespace mlap {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed-derivation tags for the experiment layer (5xx block).
constexpr std::uint64_t kTagEnvBase = 501;
constexpr std::uint64_t kTagTrainTask = 502;
constexpr std::uint64_t kTagTestTask = 503;
constexpr std::uint64_t kTagCellTrain = 504;
constexpr std::uint64_t kTagCellTest = 505;
constexpr std::uint64_t kTagBound = 506;
constexpr std::uint64_t kTagTransferLoss = 507;

[[noreturn]] void cfg_error(const std::string& field, const std::string& msg) {
  throw std::invalid_argument("config error: " + field + " " + msg);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double var = ss / static_cast<double>(v.size() - 1);
  return std::sqrt(var / static_cast<double>(v.size()));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Oracle layer freeze per environment family: permuted labels leave only the
/// output layer trainable; permuted pixels leave only the input layer.
std::vector<std::size_t> oracle_frozen(const std::string& family,
                                       std::size_t n_layers) {
  std::vector<std::size_t> out;
  if (family == "permuted-pixels") {
    for (std::size_t l = 1; l < n_layers; ++l) out.push_back(l);
  } else {
    for (std::size_t l = 0; l + 1 < n_layers; ++l) out.push_back(l);
  }
  return out;
}

std::string fmt_double(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Mean and stddev of w.rho per layer (weights only; biases carry no
/// transform signature).
void layer_rho_profile(const StochasticNet& net, std::vector<double>& mean_out,
                       std::vector<double>& std_out) {
  mean_out.clear();
  std_out.clear();
  for (const auto& l : net.layers) {
    const double m = mean_of(l.w.rho);
    double ss = 0.0;
    for (double r : l.w.rho) ss += (r - m) * (r - m);
    mean_out.push_back(m);
    std_out.push_back(std::sqrt(ss / static_cast<double>(l.w.rho.size())));
  }
}

json record_to_json(const RunRecord& r) {
  json j;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["n_train_tasks"] = r.n_train_tasks;
  j["status"] = r.status;
  j["test_error"] = r.test_error;
  j["half_width"] = r.half_width;
  j["task_errors"] = r.task_errors;
  j["bound"] = r.bound;
  j["transfer_loss"] = r.transfer_loss;
  j["kl_task"] = r.kl_task;
  j["kl_hyper"] = r.kl_hyper;
  j["layer_mean_rho"] = r.layer_mean_rho;
  j["layer_std_rho"] = r.layer_std_rho;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace

void EnvironmentSpec::validate() const {
  if (family != "permuted-labels" && family != "permuted-pixels")
    cfg_error("environment.family", "must be permuted-labels or permuted-pixels");
  if (base != "blobs" && base != "idx")
    cfg_error("environment.base", "must be blobs or idx");
  if (base == "idx" && (idx_images.empty() || idx_labels.empty()))
    cfg_error("environment.idx_images/idx_labels", "required for base = idx");
  if (base == "blobs") {
    if (classes < 2) cfg_error("environment.classes", "must be >= 2");
    if (dim < 1) cfg_error("environment.dim", "must be >= 1");
    if (per_class < 1) cfg_error("environment.per_class", "must be >= 1");
    if (!(spread > 0.0)) cfg_error("environment.spread", "must be positive");
    const std::size_t pool = classes * per_class;
    if (m_train + m_test > pool)
      cfg_error("environment.m_train/m_test", "exceed the base dataset size");
    if (m_train_new + m_test > pool)
      cfg_error("environment.m_train_new/m_test", "exceed the base dataset size");
  }
  if (n_train_tasks < 1) cfg_error("environment.n_train_tasks", "must be >= 1");
  if (n_test_tasks < 1) cfg_error("environment.n_test_tasks", "must be >= 1");
  if (m_train < 2) cfg_error("environment.m_train", "must be >= 2");
  if (m_train_new < 2) cfg_error("environment.m_train_new", "must be >= 2");
  if (m_test < 1) cfg_error("environment.m_test", "must be >= 1");
}

void ExperimentConfig::validate() const {
  if (methods.empty())
    cfg_error("experiment.methods", "must list at least one method");
  if (seeds.empty()) cfg_error("experiment.seeds", "must list at least one seed");
  for (std::size_t n : effective_task_counts())
    if (n < 1) cfg_error("experiment.task_counts", "entries must be >= 1");
  for (std::size_t h : hidden)
    if (h < 1) cfg_error("model.hidden", "entries must be >= 1");
  env.validate();
  train.validate();
}

std::vector<std::size_t> ExperimentConfig::effective_task_counts() const {
  if (!task_counts.empty()) return task_counts;
  return {env.n_train_tasks};
}

MethodSpec parse_method(const std::string& name) {
  MethodSpec m;
  m.name = lower(name);
  if (m.name == "mlap-m" || m.name == "mlap-mcallester") {
    m.objective = ObjectiveKind::McAllester;
  } else if (m.name == "mlap-s" || m.name == "mlap-seeger") {
    m.objective = ObjectiveKind::Seeger;
  } else if (m.name == "mlap-pl") {
    m.objective = ObjectiveKind::PentinaLampert;
  } else if (m.name == "mlap-vb") {
    m.objective = ObjectiveKind::VB;
  } else if (m.name == "mlap-nc" || m.name == "mlap-none") {
    m.objective = ObjectiveKind::NoComplexity;
  } else {
    m.is_baseline = true;
    try {
      m.baseline = baseline_kind_from_string(m.name);
    } catch (const std::exception&) {
      throw std::invalid_argument("config error: experiment.methods has unknown method '" +
                                  name + "'");
    }
  }
  return m;
}

ExperimentConfig parse_experiment_config(const toml::Table& t) {
  ExperimentConfig cfg;
  cfg.name = t.get_string("experiment.name", cfg.name);
  cfg.out_dir = t.get_string("experiment.out_dir", cfg.out_dir);
  cfg.fail_fast = t.get_bool("experiment.fail_fast", cfg.fail_fast);
  cfg.save_checkpoints = t.get_bool("experiment.save_checkpoints", cfg.save_checkpoints);
  if (t.has("experiment.seeds")) {
    cfg.seeds.clear();
    for (long long s : t.get_int_array("experiment.seeds", {}))
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  for (const auto& name : t.get_string_array("experiment.methods", {}))
    cfg.methods.push_back(parse_method(name));
  for (long long n : t.get_int_array("experiment.task_counts", {}))
    cfg.task_counts.push_back(static_cast<std::size_t>(n));

  EnvironmentSpec& e = cfg.env;
  e.family = t.get_string("environment.family", e.family);
  e.base = t.get_string("environment.base", e.base);
  e.classes = static_cast<std::size_t>(t.get_int("environment.classes", static_cast<long long>(e.classes)));
  e.dim = static_cast<std::size_t>(t.get_int("environment.dim", static_cast<long long>(e.dim)));
  e.per_class = static_cast<std::size_t>(t.get_int("environment.per_class", static_cast<long long>(e.per_class)));
  e.spread = t.get_double("environment.spread", e.spread);
  e.idx_images = t.get_string("environment.idx_images", e.idx_images);
  e.idx_labels = t.get_string("environment.idx_labels", e.idx_labels);
  e.n_swaps = static_cast<std::size_t>(t.get_int("environment.n_swaps", static_cast<long long>(e.n_swaps)));
  e.n_train_tasks = static_cast<std::size_t>(t.get_int("environment.n_train_tasks", static_cast<long long>(e.n_train_tasks)));
  e.n_test_tasks = static_cast<std::size_t>(t.get_int("environment.n_test_tasks", static_cast<long long>(e.n_test_tasks)));
  e.m_train = static_cast<std::size_t>(t.get_int("environment.m_train", static_cast<long long>(e.m_train)));
  e.m_test = static_cast<std::size_t>(t.get_int("environment.m_test", static_cast<long long>(e.m_test)));
  e.m_train_new = static_cast<std::size_t>(t.get_int("environment.m_train_new", static_cast<long long>(e.m_train_new)));

  cfg.hidden.clear();
  for (long long h : t.get_int_array("model.hidden", {32, 32}))
    cfg.hidden.push_back(static_cast<std::size_t>(h));

  TrainConfig& tr = cfg.train;
  tr.epochs = static_cast<std::size_t>(t.get_int("training.epochs", static_cast<long long>(tr.epochs)));
  tr.batch_size = static_cast<std::size_t>(t.get_int("training.batch_size", static_cast<long long>(tr.batch_size)));
  tr.lr = t.get_double("training.lr", tr.lr);
  tr.mc_samples = static_cast<std::size_t>(t.get_int("training.mc_samples", static_cast<long long>(tr.mc_samples)));
  tr.eval_mc_samples = static_cast<std::size_t>(t.get_int("training.eval_mc_samples", static_cast<long long>(tr.eval_mc_samples)));
  tr.meta_batch = static_cast<std::size_t>(t.get_int("training.meta_batch", static_cast<long long>(tr.meta_batch)));
  tr.workers = static_cast<int>(t.get_int("training.workers", tr.workers));
  tr.hyper_noise = t.get_bool("training.hyper_noise", tr.hyper_noise);
  tr.sampled_prior_meta_test =
      t.get_bool("training.sampled_prior_meta_test", tr.sampled_prior_meta_test);
  tr.objective.kappa_p = t.get_double("training.kappa_p", tr.objective.kappa_p);
  tr.objective.kappa_q = t.get_double("training.kappa_q", tr.objective.kappa_q);
  tr.objective.delta = t.get_double("training.delta", tr.objective.delta);
  cfg.test_epochs = static_cast<std::size_t>(t.get_int("training.test_epochs", 0));

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(toml::parse_file(path));
}

EnvTasks build_environment(const EnvironmentSpec& env, std::uint64_t seed,
                           std::size_t n_train) {
  BaseDataset base =
      env.base == "idx"
          ? load_idx(env.idx_images, env.idx_labels)
          : gen_blobs(env.classes, env.dim, env.per_class, env.spread,
                      mix_seed(seed, kTagEnvBase));
  EnvTasks out;
  out.input_dim = base.inputs.cols;
  out.n_classes = base.class_count;

  auto make_task = [&](std::uint64_t task_seed, std::size_t m_train) {
    if (env.family == "permuted-pixels")
      return make_permuted_pixels_task(base, task_seed, env.n_swaps, m_train,
                                       env.m_test);
    return make_permuted_labels_task(base, task_seed, m_train, env.m_test);
  };
  for (std::size_t i = 0; i < n_train; ++i)
    out.train.push_back(make_task(mix_seed(seed, kTagTrainTask, i), env.m_train));
  for (std::size_t j = 0; j < env.n_test_tasks; ++j)
    out.test.push_back(make_task(mix_seed(seed, kTagTestTask, j), env.m_train_new));
  return out;
}

RunRecord run_cell(const ExperimentConfig& cfg, const MethodSpec& method,
                   const EnvTasks& env, const NetworkArch& arch,
                   std::uint64_t seed, std::size_t n_tasks) {
  if (n_tasks > env.train.size())
    throw std::invalid_argument("run_cell: n_tasks exceeds generated tasks");
  RunRecord rec;
  rec.method = method.name;
  rec.seed = seed;
  rec.n_train_tasks = n_tasks;

  const std::vector<TaskDataset> train_tasks(env.train.begin(),
                                             env.train.begin() + n_tasks);

  TrainConfig test_cfg = cfg.train;
  test_cfg.epochs = cfg.effective_test_epochs();

  if (method.is_baseline) {
    BaselineSpec bspec;
    bspec.kind = method.baseline;
    if (bspec.kind == BaselineKind::OracleFreeze)
      bspec.frozen_layers = oracle_frozen(cfg.env.family, arch.n_layers());
    for (std::size_t j = 0; j < env.test.size(); ++j) {
      TrainConfig bcfg = test_cfg;
      bcfg.seed = mix_seed(seed, kTagCellTest, j);
      const BaselineResult br =
          run_baseline(bspec, train_tasks, env.test[j], arch, bcfg);
      rec.task_errors.push_back(br.test_error);
    }
  } else {
    TrainConfig tcfg = cfg.train;
    tcfg.objective.kind = method.objective;
    tcfg.seed = mix_seed(seed, kTagCellTrain, n_tasks);
    const MetaTrainResult mt = meta_train(train_tasks, arch, tcfg);

    layer_rho_profile(mt.prior, rec.layer_mean_rho, rec.layer_std_rho);

    // The record's bound column uses the method's own kind when it has a
    // bound form; VB / no-complexity priors are still certified via the
    // McAllester bound.
    ObjectiveKind bound_kind = method.objective;
    if (bound_kind == ObjectiveKind::VB || bound_kind == ObjectiveKind::NoComplexity)
      bound_kind = ObjectiveKind::McAllester;
    const BoundReport bound =
        evaluate_bound(mt.prior, mt.posteriors, train_tasks, tcfg, bound_kind,
                       BoundedLoss::ClippedCE, mix_seed(seed, kTagBound, n_tasks));
    rec.bound = bound.total;
    rec.kl_hyper = bound.kl_hyper;
    double klt = 0.0;
    for (const auto& tb : bound.tasks) klt += tb.kl_task;
    rec.kl_task = klt / static_cast<double>(bound.tasks.size());

    test_cfg.objective.kind = method.objective;
    double transfer = 0.0;
    for (std::size_t j = 0; j < env.test.size(); ++j) {
      TrainConfig jcfg = test_cfg;
      jcfg.seed = mix_seed(seed, kTagCellTest, j);
      const MetaTestResult res = meta_test(mt.prior, env.test[j], jcfg);
      rec.task_errors.push_back(res.test_error);
      transfer += stochastic_bounded_loss(
          res.posterior, env.test[j].test, BoundedLoss::ClippedCE,
          std::max<std::size_t>(1, cfg.train.eval_mc_samples),
          mix_seed(seed, kTagTransferLoss, j));
    }
    rec.transfer_loss = transfer / static_cast<double>(env.test.size());

    if (cfg.save_checkpoints) {
      char tail[96];
      std::snprintf(tail, sizeof tail, "_seed%llu_n%zu_prior.json",
                    static_cast<unsigned long long>(seed), n_tasks);
      const fs::path path =
          fs::path(cfg.out_dir) / "checkpoints" / (method.name + tail);
      save_checkpoint(path.string(), mt.prior, "prior");
    }
  }

  rec.test_error = mean_of(rec.task_errors);
  rec.half_width = 1.96 * stderr_of(rec.task_errors);
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
  const std::vector<std::size_t> counts = cfg.effective_task_counts();
  const std::size_t max_n = *std::max_element(counts.begin(), counts.end());

  ExperimentResult res;
  bool stop = false;
  for (std::uint64_t seed : cfg.seeds) {
    if (stop) break;
    const EnvTasks env = build_environment(cfg.env, seed, max_n);
    NetworkArch arch;
    arch.layer_sizes.push_back(env.input_dim);
    for (std::size_t h : cfg.hidden) arch.layer_sizes.push_back(h);
    arch.layer_sizes.push_back(env.n_classes);
    arch.validate();

    for (std::size_t n : counts) {
      if (stop) break;
      for (const MethodSpec& method : cfg.methods) {
        const auto t0 = std::chrono::steady_clock::now();
        RunRecord rec;
        try {
          rec = run_cell(cfg, method, env, arch, seed, n);
        } catch (const std::exception& e) {
          rec = RunRecord{};
          rec.method = method.name;
          rec.seed = seed;
          rec.n_train_tasks = n;
          rec.status = std::string("failed: ") + e.what();
          ++res.n_failed;
          if (cfg.fail_fast) stop = true;
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        res.records.push_back(std::move(rec));
        if (stop) break;
      }
    }
  }
  write_results(cfg, res);
  return res;
}

std::string results_csv(const ExperimentResult& res) {
  std::string out =
      "method,seed,n_train_tasks,status,test_error,half_width,bound,"
      "transfer_loss,kl_task,kl_hyper\n";
  for (const RunRecord& r : res.records) {
    out += csv_escape(r.method) + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.n_train_tasks) + ',' + csv_escape(r.status) + ',' +
           fmt_double(r.test_error) + ',' + fmt_double(r.half_width) + ',' +
           fmt_double(r.bound) + ',' + fmt_double(r.transfer_loss) + ',' +
           fmt_double(r.kl_task) + ',' + fmt_double(r.kl_hyper) + '\n';
  }
  return out;
}

void write_results(const ExperimentConfig& cfg, const ExperimentResult& res) {
  fs::create_directories(cfg.out_dir);
  json j;
  j["format"] = "mlap-results";
  j["version"] = {{"major", kResultsMajor}, {"minor", kResultsMinor}};
  j["experiment"] = cfg.name;
  j["environment"] = {{"family", cfg.env.family}, {"base", cfg.env.base}};
  j["n_failed"] = res.n_failed;
  json records = json::array();
  for (const RunRecord& r : res.records) records.push_back(record_to_json(r));
  j["records"] = std::move(records);

  std::ofstream jf(fs::path(cfg.out_dir) / "results.json",
                   std::ios::binary | std::ios::trunc);
  if (!jf) throw std::runtime_error("cannot write results.json in " + cfg.out_dir);
  jf << j.dump(1) << "\n";

  std::ofstream cf(fs::path(cfg.out_dir) / "results.csv",
                   std::ios::binary | std::ios::trunc);
  if (!cf) throw std::runtime_error("cannot write results.csv in " + cfg.out_dir);
  cf << results_csv(res);
}

}  // namespace mlap
