#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nsfp/errors.hpp"

namespace nsfp {

// Structural pressure profile P and its derivative at one point.
struct PEval {
  double value = 0.0;
  double deriv = 0.0;
};

// Parameters of the equation of state: radiation constant a, degenerate
// pressure coefficient p_inf, and the structural thresholds Z_lo < Z_hi
// delimiting the band where a user-supplied P may deviate from the two
// asymptotic regimes.
struct EosParams {
  double a = 1.0;
  double p_inf = 1.0;
  double z_lo = 0.1;
  double z_hi = 10.0;
  bool monotone_extension = true;

  void validate() const {
    if (a <= 0.0) throw ConfigError("eos: radiation constant a must be > 0");
    if (p_inf <= 0.0) throw ConfigError("eos: p_inf must be > 0");
    if (!(0.0 < z_lo && z_lo < z_hi))
      throw ConfigError("eos: thresholds must satisfy 0 < z_lo < z_hi");
  }
};

struct TransportParams {
  double mu_lo = 0.05, mu_hi = 0.1;
  double eta_lo = 0.025, eta_hi = 0.05;
  double kappa_lo = 0.1, kappa_hi = 0.2;
  double alpha = 6.5;

  void validate() const {
    if (!(0.0 < mu_lo && mu_lo <= mu_hi))
      throw ConfigError("transport: need 0 < mu_lo <= mu_hi");
    if (!(0.0 <= eta_lo && eta_lo <= eta_hi))
      throw ConfigError("transport: need 0 <= eta_lo <= eta_hi");
    if (!(0.0 < kappa_lo && kappa_lo <= kappa_hi))
      throw ConfigError("transport: need 0 < kappa_lo <= kappa_hi");
    if (!(alpha > 6.0)) throw ConfigError("transport: conductivity exponent alpha must be > 6");
  }
};

struct ThermoState {
  double rho = 0.0;   // mass density, >= 0
  double theta = 1.0; // absolute temperature, > 0
};

struct TransportCoeffs {
  double mu = 0.0;
  double eta = 0.0;
  double kappa = 0.0;
};

// Temperature-affine viscosities and power-law conductivity; the defaults
// sit on the lower-bound envelope of the admissible band.
TransportCoeffs transport(double theta, const TransportParams& tp);

// Equation of state built from a structural profile P(Z), Z = rho/theta^{3/2}:
//   p_M   = theta^{5/2} P(Z)
//   e_M   = (3/2) p_M / rho          (monatomic relation applied globally)
//   s_M   = S(Z),  S'(Z) = -(3/2) [(5/3)P - Z P'] / Z^2,  S(inf) = 0
// plus the radiative closure p_R = (a/3) theta^4, e_R = a theta^4 / rho,
// s_R = (4a/3) theta^3 / rho.  The default profile is
//   P(Z) = p_inf Z^{5/3} + Z / (1 + Z)
// for which S has the closed form log(1 + 1/Z) + (3/2)/(1 + Z); a custom
// profile falls back to adaptive quadrature for S.
class Eos {
 public:
  explicit Eos(EosParams p);
  Eos(EosParams p, std::function<PEval(double)> custom_P);

  const EosParams& params() const { return params_; }
  bool has_custom_P() const { return static_cast<bool>(custom_P_); }

  PEval structural_P(double Z) const;

  double molecular_pressure(double rho, double theta) const;
  double pressure(double rho, double theta) const;

  // Energy density rho*e; well defined at rho = 0 (pure radiation).
  double energy_density(double rho, double theta) const;
  double internal_energy(double rho, double theta) const; // specific, rho > 0

  double molecular_entropy(double Z) const; // S(Z)
  double entropy(double rho, double theta) const;         // specific, rho > 0

  // d(rho e)/d(theta) at fixed rho with radiation constant a_eff.
  double energy_density_dtheta(double rho, double theta, double a_eff) const;
  // rho e with radiation constant a_eff (penalized cells use a_eff = chi_xi a).
  double energy_density_scaled(double rho, double theta, double a_eff) const;
  // Zero-temperature limit of the energy density, (3/2) p_inf rho^{5/3}.
  double zero_temperature_energy(double rho) const;

  // Unique theta > 0 with rho e(rho, theta) = E; safeguarded Newton with
  // bisection fallback, residual <= 1e-12 * E.
  double invert_internal_energy(double rho, double E, double a_eff) const;

  double sound_speed_sq(double rho, double theta) const; // d p_M / d rho at fixed theta

  // Pressure and energy density with the zero-temperature (polytropic) part
  // removed.  Theta-derivatives of p and rho*e equal those of these thermal
  // parts, which stay resolvable in the degenerate regime where the full
  // values are dominated by the theta-independent p_inf rho^{5/3} piece.
  double thermal_pressure(double rho, double theta) const;
  double thermal_energy_density(double rho, double theta, double a_eff) const;

 private:
  EosParams params_;
  std::function<PEval(double)> custom_P_;

  double entropy_by_quadrature(double Z) const;
};

struct AuditCheck {
  std::string name;
  bool pass = false;
  double witnessed = 0.0; // witnessed constant, when the hypothesis has one
  double worst_rho = 0.0;
  double worst_theta = 0.0;
  std::string note;
};

struct AuditReport {
  std::vector<AuditCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  std::string format() const;
};

struct AuditGrid {
  double rho_min = 1e-6, rho_max = 1e3;
  double theta_min = 1e-6, theta_max = 1e3;
  int n_rho = 64, n_theta = 64;

  std::vector<double> rho_samples() const;
  std::vector<double> theta_samples() const;
};

// Executable audit of the constitutive hypotheses on a log-spaced state grid:
// monotone molecular pressure, bounded molecular heat capacity (with the
// witnessed constant refined by a 1-D maximization), bounded rho d(e_M)/d(rho),
// P' > 0 with P(0) = 0 and P'(0) > 0, the degenerate limit P/Z^{5/3} -> p_inf,
// strictly decreasing S with S(inf) = 0, Gibbs consistency under central
// differences, the coercivity bound rho e >= a theta^4 + (3/2) p_inf rho^{5/3},
// and the molecular-pressure sandwich with witnessed envelope constants.
AuditReport hypothesis_audit(const Eos& eos, const TransportParams& tp,
                             const AuditGrid& grid = AuditGrid{});

}  // namespace nsfp
