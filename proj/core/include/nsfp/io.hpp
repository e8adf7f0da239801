#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nsfp/grid.hpp"

namespace nsfp {

// write-then-rename, so readers never see a partial file
void atomic_write(const std::string& path, const std::string& content);

// Self-describing text snapshot: header lines (dims, spacing, time, field
// list) then one row per cell, row-major, with the fields as columns.
void write_snapshot(const std::string& path, const Grid& g, double time,
                    const std::vector<std::pair<std::string, const ScalarField*>>& fields);

struct Snapshot {
  int dim = 0;
  int cells = 0;
  double spacing = 0.0;
  double time = 0.0;
  std::vector<std::string> field_names;
  std::vector<ScalarField> fields;
};

Snapshot read_snapshot(const std::string& path);

}  // namespace nsfp
