// Versioned JSON checkpoints for stochastic network parameters.
//
// Format: {"format": "mlap-checkpoint", "version": {"major": 1, "minor": 0},
//          "role": ..., "arch": {"layer_sizes": [...]},
//          "layers": [{"w_mu": [...], "w_rho": [...], "b_mu": [...], "b_rho": [...]}]}
//
// Doubles are written in shortest round-trip decimal, so save -> load -> save
// reproduces the file byte for byte and parameters bit for bit.
#pragma once

#include <string>

#include "mlap/stochnet.hpp"

namespace mlap {

inline constexpr int kCheckpointMajor = 1;
inline constexpr int kCheckpointMinor = 0;

/// Writes `net` to `path`. Throws std::runtime_error on I/O failure or if any
/// parameter is non-finite (a corrupt net must not produce a valid-looking file).
void save_checkpoint(const std::string& path, const StochasticNet& net,
                     const std::string& role);

/// Reads a checkpoint. Throws std::runtime_error on malformed files, shape
/// mismatches, or an unknown major version. If `role` is non-null it receives
/// the stored role string.
StochasticNet load_checkpoint(const std::string& path,
                              std::string* role = nullptr);

}  // namespace mlap
