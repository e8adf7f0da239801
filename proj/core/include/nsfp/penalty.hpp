#pragma once

#include "nsfp/eos.hpp"
#include "nsfp/grid.hpp"

namespace nsfp {

// Penalty / regularization parameter set.  Under the scaling schedule the
// floors are slaved to the master scale h: lambda = h, nu = omega = h^3,
// xi = h^6.
struct PenaltyParams {
  double eps = 1e-3;     // boundary penalty strength
  double delta = 1e-3;   // artificial-pressure weight
  double beta = 4.0;     // artificial-pressure exponent, >= 4
  double lambda = 0.35;  // temperature-sink weight
  double omega = 0.042875;
  double nu = 0.042875;
  double xi = 1.838265625e-3;
  double alpha = 6.5;    // conductivity exponent, mirrors TransportParams
  double h = 0.35;       // master scale

  // lambda = 0, delta = 0 and eps = inf are admitted as the reduction limit
  // (plain unpenalized stepper); the penalized problem proper has them > 0.
  void validate() const {
    if (!(eps > 0.0)) throw ConfigError("penalty: eps must be > 0");
    if (!(delta >= 0.0)) throw ConfigError("penalty: delta must be >= 0");
    if (!(beta >= 4.0)) throw ConfigError("penalty: beta must be >= 4");
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw ConfigError("penalty: lambda must lie in [0,1]");
    for (double f : {omega, nu, xi})
      if (!(f > 0.0 && f <= 1.0))
        throw ConfigError("penalty: floors omega, nu, xi must lie in (0,1]");
    if (!(alpha > 6.0)) throw ConfigError("penalty: alpha must be > 6");
    if (!(h > 0.0 && h <= 1.0)) throw ConfigError("penalty: h must lie in (0,1]");
  }
};

struct ScheduleFloors {
  double lambda, nu, omega, xi;
};

// lambda = h, nu = h^3, omega = h^3, xi = h^6
ScheduleFloors scaling_schedule(double h);

// Applies the schedule in place and returns the updated params.
PenaltyParams& apply_scaling_schedule(PenaltyParams& p, double h);

// Grid-sampled mollifier masks.  f_omega ramps from 1 (fluid side) down to
// omega across `width` cells of the solid side with a cosine profile;
// chi_nu and chi_xi switch sharply at the interface.
struct MaskFields {
  ScalarField f_omega;
  ScalarField chi_nu;
  ScalarField chi_xi;
};

MaskFields build_masks(const Grid& g, const ScalarField& levelset,
                       const PenaltyParams& p, double width_cells = 3.0);

// p_M + chi_xi (a/3) theta^4 + delta rho^beta.  With chi_xi = 1 and
// delta = 0 this evaluates bit-identically to Eos::pressure.
double penalized_pressure(const Eos& eos, double rho, double theta,
                          double chi_xi, const PenaltyParams& p);

struct PenalizedThermo {
  double e_density; // rho e_xi
  double s_density; // rho s_xi
};

// Energy and entropy densities with the radiation constant scaled by chi_xi.
PenalizedThermo penalized_energy_entropy(const Eos& eos, double rho, double theta,
                                         double chi_xi);

struct MollifiedTransport {
  double mu, eta, kappa;
};

// (f_omega mu, f_omega eta, chi_nu kappa)
MollifiedTransport mollified_transport(double theta, double f_omega, double chi_nu,
                                       const TransportParams& tp);

}  // namespace nsfp
