#pragma once

#include <cstdint>
#include <vector>

#include "mlap/meta_trainer.hpp"

namespace mlap {

enum class BaselineKind { ScratchD, ScratchS, WarmStart, OracleFreeze, AveragedPrior };

std::string to_string(BaselineKind k);
BaselineKind baseline_kind_from_string(const std::string& s);

struct BaselineSpec {
  BaselineKind kind = BaselineKind::ScratchS;
  std::vector<std::size_t> frozen_layers;  // OracleFreeze only
};

struct BaselineResult {
  double test_error = 0.0;
  StochasticNet net;  // final posterior / deterministic weights (in mu)
  std::vector<EpochLog> history;
};

/// Deterministic CE + Adam training of the mean parameters only. Layers in
/// frozen stay bit-identical. Used by the Scratch-D / Warm-start / Oracle
/// baselines.
void train_deterministic(StochasticNet& net, const TaskDataset& task,
                         const TrainConfig& cfg,
                         const std::vector<std::size_t>& frozen = {});

/// Runs one baseline on a new task, given the environment's training tasks.
BaselineResult run_baseline(const BaselineSpec& spec,
                            const std::vector<TaskDataset>& env_tasks,
                            const TaskDataset& new_task, const NetworkArch& arch,
                            const TrainConfig& cfg);

}  // namespace mlap
