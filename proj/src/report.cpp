#include "mlap/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "mlap/experiment.hpp"

namespace mlap {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void schema_error(const std::string& what) {
  throw std::runtime_error("results schema error: " + what);
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) schema_error(std::string("record missing field '") + name + "'");
  return *it;
}

/// NaN doubles are serialized as null; read them back as NaN.
double num_or_nan(const json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
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
  return std::sqrt(ss / static_cast<double>(v.size() - 1) /
                   static_cast<double>(v.size()));
}

struct ParsedRecord {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::vector<double> task_errors;
  double bound = std::numeric_limits<double>::quiet_NaN();
  double transfer_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> layer_mean_rho, layer_std_rho;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report file: " + p.string());
  return out;
}

}  // namespace

ReportSummary emit_report(const std::string& results_dir) {
  const fs::path dir(results_dir);
  std::ifstream in(dir / "results.json", std::ios::binary);
  if (!in)
    throw std::runtime_error("no results.json under " + results_dir);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("malformed results.json: ") + e.what());
  }
  if (j.value("format", "") != "mlap-results")
    schema_error("not an mlap-results file");
  const int major = field(field(j, "version"), "major").get<int>();
  if (major != kResultsMajor)
    schema_error("unsupported major version " + std::to_string(major));

  ReportSummary summary;
  std::vector<ParsedRecord> recs;
  for (const json& rj : field(j, "records")) {
    ++summary.n_records;
    if (field(rj, "status").get<std::string>() != "ok") {
      ++summary.n_failed;
      continue;
    }
    ParsedRecord r;
    r.method = field(rj, "method").get<std::string>();
    r.seed = field(rj, "seed").get<std::uint64_t>();
    r.n = field(rj, "n_train_tasks").get<std::size_t>();
    for (const json& e : field(rj, "task_errors")) r.task_errors.push_back(num_or_nan(e));
    r.bound = num_or_nan(field(rj, "bound"));
    r.transfer_loss = num_or_nan(field(rj, "transfer_loss"));
    for (const json& e : field(rj, "layer_mean_rho")) r.layer_mean_rho.push_back(num_or_nan(e));
    for (const json& e : field(rj, "layer_std_rho")) r.layer_std_rho.push_back(num_or_nan(e));
    recs.push_back(std::move(r));
  }

  // Pooled per-task errors and per-seed bounds, keyed (method, n).
  std::map<std::string, std::map<std::size_t, std::vector<double>>> pooled;
  std::map<std::string, std::map<std::size_t, std::vector<double>>> bounds;
  std::map<std::string, std::map<std::size_t, std::vector<double>>> transfers;
  for (const auto& r : recs) {
    auto& cell = pooled[r.method][r.n];
    cell.insert(cell.end(), r.task_errors.begin(), r.task_errors.end());
    if (!std::isnan(r.bound)) bounds[r.method][r.n].push_back(r.bound);
    if (!std::isnan(r.transfer_loss))
      transfers[r.method][r.n].push_back(r.transfer_loss);
  }

  // trend.csv — one row per (method, task count); the trend label compares
  // the first and last counts against the stderr of their difference.
  {
    auto out = open_out(dir / "trend.csv");
    out << "method,n_train_tasks,mean_error,stderr,trend\n";
    for (const auto& [method, by_n] : pooled) {
      std::string label = "n/a";
      if (by_n.size() >= 2) {
        const auto& first = by_n.begin()->second;
        const auto& last = by_n.rbegin()->second;
        const double diff = mean_of(first) - mean_of(last);
        const double tol = std::sqrt(stderr_of(first) * stderr_of(first) +
                                     stderr_of(last) * stderr_of(last));
        label = diff > tol ? "improving" : (-diff > tol ? "degrading" : "flat");
      }
      summary.trend[method] = label;
      for (const auto& [n, errs] : by_n)
        out << method << ',' << n << ',' << fmt(mean_of(errs)) << ','
            << fmt(stderr_of(errs)) << ',' << label << '\n';
    }
  }

  // layer_profile.csv — per-layer prior log-variance statistics.
  {
    auto out = open_out(dir / "layer_profile.csv");
    out << "method,seed,n_train_tasks,layer,mean_rho,std_rho\n";
    for (const auto& r : recs) {
      if (r.layer_mean_rho.size() != r.layer_std_rho.size())
        schema_error("layer profile arrays disagree in length");
      for (std::size_t l = 0; l < r.layer_mean_rho.size(); ++l)
        out << r.method << ',' << r.seed << ',' << r.n << ',' << l << ','
            << fmt(r.layer_mean_rho[l]) << ',' << fmt(r.layer_std_rho[l]) << '\n';
    }
  }

  // table1.csv — method comparison with 95% half-widths over pooled tasks.
  {
    auto out = open_out(dir / "table1.csv");
    out << "# MAML (external method) is not included in this comparison\n";
    out << "method,n_train_tasks,mean_error,half_width,mean_bound,mean_transfer_loss\n";
    for (const auto& [method, by_n] : pooled) {
      for (const auto& [n, errs] : by_n) {
        const auto& bs = bounds[method][n];
        const auto& ts = transfers[method][n];
        out << method << ',' << n << ',' << fmt(mean_of(errs)) << ','
            << fmt(1.96 * stderr_of(errs)) << ','
            << fmt(bs.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(bs))
            << ','
            << fmt(ts.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(ts))
            << '\n';
      }
    }
  }

  return summary;
}

}  // namespace mlap
