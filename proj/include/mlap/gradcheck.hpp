// Finite-difference verification of the joint objective gradients.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlap/meta_trainer.hpp"

namespace mlap {

struct GradCheckCase {
  std::string objective;
  std::size_t n_params = 0;   // FD coordinates (prior + all posteriors)
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<GradCheckCase> cases;
};

/// Compares joint_eval's analytic gradients against central finite
/// differences on seeded small instances (two tasks, two dense layers,
/// 34 distribution parameters per net, 102 in total), cycling through all
/// objective kinds. Noise is frozen by reusing one noise seed per instance, so the
/// objective is a deterministic function of the parameters. Relative error
/// is |analytic - fd| / max(|analytic| + |fd|, 1e-2).
GradCheckReport gradcheck_joint(std::size_t n_trials, std::uint64_t seed,
                                double fd_step = 1e-5);

}  // namespace mlap
