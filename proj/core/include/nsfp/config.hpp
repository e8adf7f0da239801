#pragma once

#include <string>
#include <vector>

#include "nsfp/eos.hpp"
#include "nsfp/geometry.hpp"
#include "nsfp/penalty.hpp"
#include "nsfp/poisson.hpp"
#include "nsfp/solver.hpp"

namespace nsfp {

struct OutputConfig {
  std::string directory = "out";
  int diagnostics_cadence = 1;
  double snapshot_interval = 0.1;
};

struct SweepSection {
  std::vector<double> values;
  double slope_min = 0.0;
  double r2_min = 0.0;
};

struct RunConfig {
  int dim = 2;
  int cells = 64;
  double half_width = 2.0;

  ShapeSpec shape;
  VelocityFieldSpec velocity;
  double volume_floor = 0.5; // M0
  double tube_width_cells = 3.0;

  InitialProfile initial;
  BoundaryData boundary;

  EosParams eos;
  TransportParams transport;
  PenaltyParams penalty;
  bool penalty_use_schedule = true;
  GravityParams gravity;
  StepConfig stepping;
  double t_end = 0.5;

  OutputConfig output;

  SweepSection sweep_eps{{1e-1, 1e-2, 1e-3, 1e-4}, 0.8, 0.0};
  SweepSection sweep_h{{0.5, 0.35, 0.25, 0.18}, 0.0, 0.9};
  SweepSection sweep_delta{{1e-1, 1e-2, 1e-3, 1e-4}, 0.9, 0.0};

  Grid make_grid() const { return Grid(dim, cells, half_width); }
  void validate() const;
};

// INI-style parser: [section] headers, key = value lines, '#'/';' comments.
// Unknown sections or keys are hard errors with the offending line number.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Complete commented reference configuration; parses back to the defaults.
std::string default_config_text();

}  // namespace nsfp
