#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsfp/config.hpp"
#include "nsfp/diagnostics.hpp"

namespace nsfp {

struct RunResult {
  std::vector<DiagnosticsRecord> records;
  long steps = 0;
  double wall_seconds = 0.0;
  long inversion_warnings = 0;
  // time-integrated sweep metrics
  std::map<std::string, double> metrics;
  std::string diagnostics_csv; // full CSV text (also written to disk unless quiet)
  std::vector<std::string> warnings; // e.g. superlinearly growing bound monitors
};

struct RunOptions {
  bool write_outputs = true;
  bool echo_progress = false;
};

// Drives a single simulation to t_end: per-step diagnostics, ballistic
// residual assembly, metric accumulation, snapshot/CSV output.
RunResult run_simulation(const RunConfig& cfg, const RunOptions& opt = RunOptions{});

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points_used = 0;
  std::vector<std::string> warnings;
};

// Ordinary least squares of log(y) against log(x); nonpositive y values are
// dropped with a warning.
FitResult fit_slope(const std::vector<double>& xs, const std::vector<double>& ys);

enum class SweepParam { Eps, H, Delta };

struct SweepMetricVerdict {
  std::string metric;
  FitResult fit;
  double theoretical_exponent = 0.0; // annotation only, never enforced
  bool pass = false;
};

struct SweepReport {
  SweepParam param{};
  std::vector<double> values;
  std::vector<std::map<std::string, double>> per_run_metrics;
  std::vector<SweepMetricVerdict> verdicts;
  bool pass = false;
  std::string failed_value; // set when a member run aborted

  std::string format() const;
  std::string csv() const; // (parameter, metric...) table
};

// Runs the geometric parameter ladder for one of eps / h / delta (one
// parameter per sweep; the limits are taken sequentially, never jointly) and
// fits log-log decay slopes of the associated metrics.
SweepReport run_sweep(const RunConfig& base, SweepParam param,
                      const RunOptions& opt = RunOptions{});

int sweep_workers(); // from NSFP_WORKERS, default 1 (serial, bit-reproducible)

}  // namespace nsfp
