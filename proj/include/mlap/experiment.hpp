// Batch experiment orchestration: config parsing, environment construction,
// per-(method, seed, task-count) runs, and results persistence.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mlap/baselines.hpp"
#include "mlap/envgen.hpp"
#include "mlap/meta_trainer.hpp"
#include "mlap/tomlmini.hpp"

namespace mlap {

inline constexpr int kResultsMajor = 1;
inline constexpr int kResultsMinor = 0;

struct EnvironmentSpec {
  std::string family = "permuted-labels";  // permuted-labels | permuted-pixels
  std::string base = "blobs";              // blobs | idx
  // blobs parameters
  std::size_t classes = 4;
  std::size_t dim = 64;
  std::size_t per_class = 400;
  double spread = 0.1;
  // idx paths (resolved against the cache dir by the CLI)
  std::string idx_images;
  std::string idx_labels;
  // task construction
  std::size_t n_swaps = 16;        // permuted-pixels only
  std::size_t n_train_tasks = 5;
  std::size_t n_test_tasks = 10;
  std::size_t m_train = 200;       // samples per training task
  std::size_t m_test = 500;        // held-out split per task
  std::size_t m_train_new = 50;    // adaptation samples per meta-test task

  void validate() const;
};

/// A method cell: either an MLAP variant (objective kind) or a baseline.
struct MethodSpec {
  std::string name;
  bool is_baseline = false;
  ObjectiveKind objective = ObjectiveKind::Seeger;
  BaselineKind baseline = BaselineKind::ScratchS;
};

/// Maps config method names (mlap-m, mlap-s, mlap-pl, mlap-vb, mlap-nc,
/// scratch-d, scratch-s, warm-start, oracle-freeze, averaged-prior) to specs.
/// Throws std::invalid_argument for unknown names.
MethodSpec parse_method(const std::string& name);

struct ExperimentConfig {
  std::string name = "experiment";
  std::string out_dir = "results";
  std::vector<std::uint64_t> seeds{1};
  std::vector<MethodSpec> methods;
  std::vector<std::size_t> task_counts;  // empty -> {env.n_train_tasks}
  bool fail_fast = false;
  bool save_checkpoints = true;
  EnvironmentSpec env;
  std::vector<std::size_t> hidden{32, 32};
  TrainConfig train;
  std::size_t test_epochs = 0;  // 0 -> train.epochs

  void validate() const;
  std::vector<std::size_t> effective_task_counts() const;
  std::size_t effective_test_epochs() const {
    return test_epochs == 0 ? train.epochs : test_epochs;
  }
};

/// Parses the documented config schema; unknown sections/keys are ignored so
/// configs can carry commentary fields. Validation errors name the field.
ExperimentConfig parse_experiment_config(const toml::Table& t);
ExperimentConfig load_experiment_config(const std::string& path);

struct RunRecord {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t n_train_tasks = 0;
  std::string status = "ok";  // or "failed: <reason>"

  double test_error = std::numeric_limits<double>::quiet_NaN();
  double half_width = std::numeric_limits<double>::quiet_NaN();  // 1.96*stderr
  std::vector<double> task_errors;  // per meta-test task, mean-forward 0-1

  // Transfer-bound block (MLAP methods only; NaN otherwise).
  double bound = std::numeric_limits<double>::quiet_NaN();
  double transfer_loss = std::numeric_limits<double>::quiet_NaN();
  double kl_task = std::numeric_limits<double>::quiet_NaN();
  double kl_hyper = std::numeric_limits<double>::quiet_NaN();

  // Learned-prior per-layer log-variance profile (weights only).
  std::vector<double> layer_mean_rho;
  std::vector<double> layer_std_rho;

  double wall_seconds = 0.0;  // excluded from the CSV (determinism contract)
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::size_t n_failed = 0;
};

/// Environment realization for one experiment seed.
struct EnvTasks {
  std::vector<TaskDataset> train;
  std::vector<TaskDataset> test;
  std::size_t input_dim = 0;
  std::size_t n_classes = 0;
};

/// Builds n_train training tasks and env.n_test_tasks meta-test tasks.
/// Training task i's data depends only on (seed, i), so larger task counts
/// extend the same sequence, and meta-test tasks are shared across counts.
EnvTasks build_environment(const EnvironmentSpec& env, std::uint64_t seed,
                           std::size_t n_train);

/// One (method, seed, task-count) cell. Uses the first n_tasks entries of
/// env.train. Throws on failure; run_experiment catches per cell.
RunRecord run_cell(const ExperimentConfig& cfg, const MethodSpec& method,
                   const EnvTasks& env, const NetworkArch& arch,
                   std::uint64_t seed, std::size_t n_tasks);

/// Runs the full grid and writes results.json + results.csv under
/// cfg.out_dir. Failed cells are recorded and counted; with fail_fast the
/// grid stops after the first failure.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Deterministic CSV rendering of the records (no wall-clock column).
std::string results_csv(const ExperimentResult& res);

void write_results(const ExperimentConfig& cfg, const ExperimentResult& res);

}  // namespace mlap
