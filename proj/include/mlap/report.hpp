// Report emission from a results directory: trend table (error vs number of
// training tasks), per-layer prior log-variance profiles, and a method
// comparison table with 95% half-widths.
#pragma once

#include <cstddef>
#include <map>
#include <string>

namespace mlap {

struct ReportSummary {
  // method -> "improving" | "flat" | "degrading" | "n/a" (single point)
  std::map<std::string, std::string> trend;
  std::size_t n_records = 0;
  std::size_t n_failed = 0;
};

/// Reads <results_dir>/results.json and writes trend.csv, layer_profile.csv
/// and table1.csv next to it. Throws std::runtime_error on missing files,
/// unknown schema major versions, or records missing required fields.
ReportSummary emit_report(const std::string& results_dir);

}  // namespace mlap
