#pragma once

#include <functional>

#include "nsfp/eos.hpp"
#include "nsfp/geometry.hpp"
#include "nsfp/grid.hpp"
#include "nsfp/penalty.hpp"
#include "nsfp/poisson.hpp"

namespace nsfp {

struct StepConfig {
  double cfl_conv = 0.4;
  // the viscous/conductive limits follow dt = cfl * rho dx^2 / coeff; the
  // defaults absorb the 1/(2d (2 + eta/mu)) stability factor of the full
  // stress tensor
  double cfl_visc = 0.08;
  double cfl_cond = 0.2;
  double dt_max = 5e-3;
  double rho_floor = 1e-12;
  double theta_floor = 1e-12;
  // below this density a cell carries no resolvable matter: its velocity
  // comes from the smooth extension and its energy update is pointwise
  // backward Euler (the explicit limit collapses with the heat capacity)
  double rho_vacuum_cut = 1e-8;
  // light cells (freshly filled from vacuum) switch to a pointwise-implicit
  // viscous update; their inertia is too small for the explicit limit
  double rho_visc_implicit = 0.04;
  double dirichlet_band_cells = 1.0;
  double mask_width_cells = 3.0;
  double band_half_width_cells = 1.5;
  double geometry_rebuild_fraction = 0.2; // of dx, interface motion per rebuild
  double dt_geom = 2e-3;                  // flow-map integrator step
  int extension_sweeps = 60;
  int vacuum_sweeps = 200; // Gauss-Seidel sweep cap of the vacuum conduction solve
  int max_dt_retries = 10;
  int dim = 2;

  void validate() const {
    for (double c : {cfl_conv, cfl_visc, cfl_cond})
      if (!(c > 0.0 && c < 1.0)) throw ConfigError("stepping: CFL numbers must lie in (0,1)");
    if (!(rho_floor > 0.0 && rho_floor <= 1e-10))
      throw ConfigError("stepping: rho_floor must lie in (0, 1e-10]");
    if (!(theta_floor > 0.0 && theta_floor <= 1e-10))
      throw ConfigError("stepping: theta_floor must lie in (0, 1e-10]");
    if (dirichlet_band_cells < 0.5)
      throw ConfigError("stepping: dirichlet band must be at least half a cell");
    if (dim != 2 && dim != 3) throw ConfigError("stepping: dim must be 2 or 3");
  }
};

// Interface temperature data theta_B(t,x) > 0: a constant base plus an
// optional angular cosine modulation about the origin.
struct BoundaryData {
  double base = 1.0;
  double angular_amplitude = 0.0;
  int angular_mode = 1;

  double theta_B(double /*t*/, const Vec3& x) const {
    double v = base;
    if (angular_amplitude != 0.0)
      v += angular_amplitude * std::cos(angular_mode * std::atan2(x.y, x.x));
    return v;
  }
  void validate() const {
    if (!(base - std::abs(angular_amplitude) > 0.0))
      throw ConfigError("boundary: theta_B must be strictly positive");
  }
};

struct FieldSet {
  ScalarField rho;
  VectorField momentum; // conservative m = rho u
  ScalarField Eint;     // penalized internal energy density rho e_xi
  ScalarField theta;
  VectorField u; // derived velocity; smooth extension where rho < vacuum cut
  ScalarField Psi;
  ScalarField theta_tilde;
};

enum class ProfileKind { Uniform, GaussianBlob, Hydrostatic1D };

struct InitialProfile {
  ProfileKind kind = ProfileKind::GaussianBlob;
  double rho0 = 1.0;
  double theta0 = 1.0;
  Vec3 center{0, 0, 0};
  double sigma = 0.35;
  double peak = 1.0;
  double pedestal = 0.0;
  double accel = 1.0; // hydrostatic-1d potential is Psi = -accel x^2 / 2
};

// Discrete Laplace solve with the boundary value theta_B pinned on the zero
// contour of phi via a cut-stencil (sub-cell interface distances), solved on
// the fluid and solid sides simultaneously; mirrored ghosts at the walls.
// The maximum principle keeps the result within the data range.
ScalarField harmonic_extension(const Grid& g, const ScalarField& phi,
                               const std::function<double(const Vec3&)>& theta_B,
                               const ScalarField* warm_start = nullptr,
                               double tol = 1e-11, int max_iter = 20000);

struct StepStats {
  double t = 0.0;
  double dt = 0.0;
  int poisson_iters = 0;
  int inversion_warnings = 0;
  bool geometry_rebuilt = false;
  double swept_mass = 0.0; // matter reabsorbed from freshly solid cells
  // exact ballistic-energy increment of the swept-cell redistribution; the
  // diagnostics book it as work done by the moving wall
  double sweep_B_jump = 0.0;
};

class Stepper {
 public:
  Stepper(Grid grid, Eos eos, TransportParams tp, PenaltyParams pp, GravityParams gp,
          StepConfig sc, VelocityFieldSpec vel, ShapeSpec shape, BoundaryData bd,
          InitialProfile prof, double M0);

  const Grid& grid() const { return grid_; }
  const Eos& eos() const { return eos_; }
  const TransportParams& transport_params() const { return tp_; }
  const PenaltyParams& penalty_params() const { return pp_; }
  const StepConfig& step_config() const { return sc_; }
  const BoundaryData& boundary() const { return bd_; }
  const VelocityFieldSpec& velocity_spec() const { return vel_; }

  double time() const { return t_; }
  const FieldSet& fields() const { return f_; }
  FieldSet& mutable_fields() { return f_; } // tests drive sub-steps directly
  MaskFields& mutable_masks() { return masks_; }
  const DomainGeometry& geometry() const { return geo_; }
  const MaskFields& masks() const { return masks_; }
  long total_inversion_warnings() const { return inversion_warnings_; }

  Vec3 domain_velocity(const Vec3& x) const { return eval_velocity(vel_, t_, x); }
  Vec3 domain_velocity(double t, const Vec3& x) const { return eval_velocity(vel_, t, x); }

  double compute_dt() const;

  // One full step: geometry advance + masks, gravity, continuity, momentum,
  // energy with inversion and Dirichlet data. Halves dt on a rejected step.
  StepStats advance();

  // Sub-steps on the current state (unit-test entry points). Each consumes
  // the state at the current time and writes the updated fields.
  void gravity_substep(StepStats* stats = nullptr);
  void continuity_substep(double dt);
  void momentum_substep(double dt);
  void energy_substep(double dt, StepStats* stats = nullptr);

  // Re-derive u from momentum (extension + massless penalty pinning uses dt).
  void refresh_velocity(double dt);
  // Rebuild level set, interface data, masks and theta_tilde at time t.
  void rebuild_geometry(double t);

  double total_mass() const;

 private:
  Grid grid_;
  Eos eos_;
  TransportParams tp_;
  PenaltyParams pp_;
  GravityParams gp_;
  StepConfig sc_;
  VelocityFieldSpec vel_;
  ShapeSpec shape_;
  BoundaryData bd_;
  double M0_;

  PoissonSolver poisson_;
  ScalarField phi0_;
  double t_ = 0.0;
  FieldSet f_;
  DomainGeometry geo_;
  MaskFields masks_;
  double motion_since_rebuild_ = 0.0;
  double vmax_ = 0.0;
  long inversion_warnings_ = 0;

  double sample_phi0(const Vec3& x) const;
  void reabsorb_solid_matter(const ScalarField& chi_xi_at_sync,
                             const ScalarField& theta_tilde_frozen, StepStats* stats);
  double cell_ballistic(int c, const ScalarField& chi_xi,
                        const ScalarField& theta_tilde) const;
  void enforce_dirichlet();
  double solve_vacuum_theta(double rhs, double a_eff, double cond_diag, double dt,
                            double guess) const;
  void check_state(const char* where) const;
};

}  // namespace nsfp
