#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nsfp/grid.hpp"

namespace nsfp {

enum class VelocityKind { Static, RigidRotation, Pulsation, UserTabulated };

// Prescribed domain velocity V(t,x).  All built-ins vanish for |x| >= support
// radius R via a smooth radial cutoff of width `cutoff_width` ending at R.
struct VelocityFieldSpec {
  VelocityKind kind = VelocityKind::Static;
  double rate = 0.0;      // rigid rotation angular rate (about z)
  double amplitude = 0.0; // pulsation amplitude
  double frequency = 0.0; // pulsation frequency
  double support_radius = 1.6;
  double cutoff_width = 0.4;
  std::string table_path; // user-tabulated field file

  // populated for UserTabulated
  int tab_n = 0;
  int tab_dim = 2;
  double tab_half = 0.0;
  std::vector<Vec3> table;
};

VelocityFieldSpec load_tabulated_velocity(const std::string& path);

Vec3 eval_velocity(const VelocityFieldSpec& spec, double t, const Vec3& x);
double eval_divergence(const VelocityFieldSpec& spec, double t, const Vec3& x,
                       double fd_step);

// Classical RK4 integration of dX/dt = V with step <= dt_geom.
Vec3 advance_flow_map(const VelocityFieldSpec& spec, double t0, double t1,
                      const Vec3& seed, double dt_geom);
std::vector<Vec3> advance_flow_map(const VelocityFieldSpec& spec, double t0, double t1,
                                   const std::vector<Vec3>& seeds, double dt_geom);

// Initial domain shapes; the level set is negative inside the fluid region.
enum class ShapeKind { Circle, Ellipse, HalfSpace, Box };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Ellipse;
  Vec3 center{0.0, 0.0, 0.0};
  double r = 1.0;            // circle radius
  double rx = 1.0, ry = 0.7, rz = 0.7; // ellipse semi-axes
  Vec3 normal{1.0, 0.0, 0.0};          // half-space: fluid where (x-c).n < 0
  Vec3 extent{1.0, 1.0, 1.0};          // box half-extents
};

// Approximate signed distance of the shape; reinitialized before use.
ScalarField initial_level_set(const Grid& g, const ShapeSpec& shape);

// phi(t, x) = phi0(X^{-1}(t, x)) by backward trajectory integration per grid
// node, then fast-marching reinitialization near the interface.
ScalarField rebuild_level_set(const Grid& g, const VelocityFieldSpec& spec, double t,
                              const std::function<double(const Vec3&)>& phi0,
                              double dt_geom);

void reinitialize(const Grid& g, ScalarField& phi);

// Per-time-slice interface data derived from a reinitialized level set.
struct DomainGeometry {
  ScalarField phi;          // negative inside Omega_t
  VectorField normal;       // grad phi / |grad phi| on the band, else 0
  ScalarField delta_weight; // smoothed surface measure density (includes |grad phi|)
  ScalarField fluid_indicator; // 1 fluid cell, 0 solid cell
  double volume = 0.0;         // smoothed |Omega_t|
  double band_half_width = 0.0;
  int degenerate_cells = 0; // band cells skipped for |grad phi| ~ 0
};

DomainGeometry interface_geometry(const Grid& g, const ScalarField& phi,
                                  double band_half_width_cells = 1.5);

struct VelocityValidationReport {
  double max_div_in_tube = 0.0;
  double max_speed_outside_support = 0.0;
  double min_volume = 0.0;
  bool support_ok = true;
  bool volume_floor_ok = true;
  bool divergence_ok = true;
  std::vector<std::string> warnings;
  std::string format() const;
};

// Samples |div V| over a tube around Gamma_t at the given times, checks the
// compact support against the box, and monitors the volume floor M0.
VelocityValidationReport validate_velocity(const Grid& g, const VelocityFieldSpec& spec,
                                           const ShapeSpec& shape,
                                           const std::vector<double>& times,
                                           double tube_width_cells, double M0,
                                           double dt_geom, double div_tol = 1e-8);

}  // namespace nsfp
