#pragma once

#include <map>
#include <string>

#include "nsfp/eos.hpp"
#include "nsfp/geometry.hpp"
#include "nsfp/grid.hpp"
#include "nsfp/penalty.hpp"
#include "nsfp/solver.hpp"

namespace nsfp {

// Everything monitored per diagnostic step.  The A-integrals are the running
// time-accumulated solid-region sums; *_rate are their instantaneous values.
struct DiagnosticsRecord {
  double t = 0.0;
  double dt = 0.0;
  double mass = 0.0;
  Vec3 momentum{};
  double kinetic = 0.0;
  double internal = 0.0; // sum rho e_xi dV
  double ballistic = 0.0;
  double dissipation = 0.0; // D(t)
  double work = 0.0;        // W(t), including the discrete d(rho u)/dt . V term
  double residual = 0.0;    // r = dB/dt + D - W over the step starting here
  double sigma_total = 0.0;
  double sigma_min = 0.0;
  double penalty_residual = 0.0; // sum |(u-V).n|^2 delta dV (no 1/eps)
  double solid_mass = 0.0;
  double A1 = 0.0, A2 = 0.0, A3 = 0.0, A4 = 0.0;
  double A1_rate = 0.0, A2_rate = 0.0, A3_rate = 0.0, A4_rate = 0.0;
  double rho_L53 = 0.0;          // ||rho||_{5/3}^{5/3}
  double sink_L1 = 0.0;          // ||lambda theta^{alpha+1}||_1
  double grad_theta_a2 = 0.0;    // ||grad theta^{alpha/2}||_2^2
  double psi_W12 = 0.0;          // ||Psi||_{W^{1,2}}
  double rho_s_u_L1 = 0.0;       // ||rho s_xi u||_1
  double poisson_ratio = 0.0;    // ||Psi||_{W^{1,2}} / ||rho||_{6/5}
  double delta_pressure = 0.0;   // sum delta rho^beta/(beta-1) dV
  double renorm_residual = 0.0;
  double swept_mass = 0.0;
  int poisson_iters = 0;

  static std::string csv_header();
  std::string csv_row() const;
};

// B = sum( 1/2 m.u + rho e_xi - rho s_xi theta_tilde + delta rho^beta/(beta-1) ) dV
// recomputed from (rho, theta) against the given chi_xi field, so the same
// state can be measured against the mask set of either end of a step.
double ballistic_energy(const Grid& g, const ScalarField& rho, const VectorField& momentum,
                        const VectorField& u, const ScalarField& theta,
                        const ScalarField& theta_tilde, const ScalarField& chi_xi,
                        const Eos& eos, const PenaltyParams& pp);

struct EntropyProduction {
  ScalarField sigma;
  double total = 0.0;
  double min_cell = 0.0;
};

// sigma = (1/theta) (S_omega : grad u + kappa_nu |grad theta|^2 / theta) >= 0
EntropyProduction entropy_production(const Grid& g, const VectorField& u,
                                     const ScalarField& theta, const MaskFields& masks,
                                     const TransportParams& tp);

struct SolidIntegralRates {
  double A1 = 0.0; // radiation-pressure work density, (a_xi/3) theta^4
  double A2 = 0.0; // |S_omega| Frobenius
  double A3 = 0.0; // a_xi theta^3 (1 + |u|)
  double A4 = 0.0; // kappa_nu |grad theta| / theta, via grad log theta
};

SolidIntegralRates solid_integral_rates(const Grid& g, const DomainGeometry& geo,
                                        const VectorField& u, const ScalarField& theta,
                                        const MaskFields& masks, const Eos& eos,
                                        const TransportParams& tp);

// Work terms of the ballistic budget except the discrete d(rho u)/dt . V piece,
// which needs the momentum at both ends of the step.
double work_terms_static(const Grid& g, const Stepper& st, double t, const FieldSet& f,
                         const MaskFields& masks, const ScalarField& theta_tilde,
                         const ScalarField& dtheta_tilde_dt);

// D(t): sink + weighted dissipation + interface penalty.
double dissipation_D(const Grid& g, const Stepper& st, double t, const FieldSet& f,
                     const MaskFields& masks, const DomainGeometry& geo,
                     const ScalarField& theta_tilde);

// Raw interface residual sum |(u-V).n|^2 delta dV.
double interface_residual(const Grid& g, const DomainGeometry& geo, const VectorField& u,
                          const std::function<Vec3(const Vec3&)>& vel);

// DiPerna-Lions weak-form defect tested against a fixed smooth bump.
// MinOne is b(rho) = min(rho, 1); Zero degenerates to the plain weak
// continuity residual.
enum class RenormChoice { MinOne, Zero };

double renormalized_residual(const Grid& g, const ScalarField& rho0,
                             const ScalarField& rho1, const VectorField& u,
                             const ScalarField& fluid_indicator, double dt,
                             const Vec3& bump_center, double bump_radius,
                             RenormChoice choice = RenormChoice::MinOne);

struct HelmholtzCoercivityResult {
  double theta_tilde = 0.0;
  double min_value = 0.0;
  double arg_rho = 0.0;
  double arg_theta = 0.0;
  bool pass = false;
};

// Relative Helmholtz function H(rho,theta) - (rho - rho_bar) dH/drho(rho_bar,
// theta_tilde) - H(rho_bar, theta_tilde) >= 0 on the audit grid; thermodynamic
// stability makes the minimum sit at (rho_bar, theta_tilde).
std::vector<HelmholtzCoercivityResult> helmholtz_coercivity(
    const Eos& eos, const std::vector<double>& theta_tilde_values, double rho_bar = 1.0,
    const AuditGrid& grid = AuditGrid{}, double tolerance = 1e-10);

// Collects a full record for the state currently held by the stepper; the
// residual of the step is filled in by the caller once the step completes.
DiagnosticsRecord collect_record(const Stepper& st);

struct MonitorGrowth {
  std::string name;
  bool superlinear = false;
  double early_slope = 0.0;
  double late_slope = 0.0;
};

// Flags monitors whose late-half growth rate more than doubles the early-half
// rate (a crude superlinearity witness across a run).
std::vector<MonitorGrowth> monitor_growth(const std::vector<DiagnosticsRecord>& records);

}  // namespace nsfp
