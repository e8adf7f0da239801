#include "nsfp/penalty.hpp"

#include <cmath>

namespace nsfp {

ScheduleFloors scaling_schedule(double h) {
  if (!(h > 0.0 && h <= 1.0))
    throw std::domain_error("scaling_schedule: h must lie in (0,1]");
  const double h3 = h * h * h;
  return {h, h3, h3, h3 * h3};
}

PenaltyParams& apply_scaling_schedule(PenaltyParams& p, double h) {
  ScheduleFloors f = scaling_schedule(h);
  p.h = h;
  p.lambda = f.lambda;
  p.nu = f.nu;
  p.omega = f.omega;
  p.xi = f.xi;
  return p;
}

MaskFields build_masks(const Grid& g, const ScalarField& levelset,
                       const PenaltyParams& p, double width_cells) {
  if (width_cells < 1.0) throw ConfigError("build_masks: ramp width must be >= 1 cell");
  MaskFields m;
  m.f_omega = g.make_scalar(1.0);
  m.chi_nu = g.make_scalar(1.0);
  m.chi_xi = g.make_scalar(1.0);
  const double band = width_cells * g.dx;
  for (int c = 0; c < g.size(); ++c) {
    const double phi = levelset[c];
    if (phi <= 0.0) continue; // fluid cell: all masks exactly 1
    m.chi_nu[c] = p.nu;
    m.chi_xi[c] = p.xi;
    if (phi >= band) {
      m.f_omega[c] = p.omega;
    } else {
      const double ramp = 0.5 * (1.0 + std::cos(M_PI * phi / band));
      m.f_omega[c] = p.omega + (1.0 - p.omega) * ramp;
    }
  }
  return m;
}

double penalized_pressure(const Eos& eos, double rho, double theta,
                          double chi_xi, const PenaltyParams& p) {
  const double t2 = theta * theta;
  double pr = eos.molecular_pressure(rho, theta) + chi_xi * (eos.params().a / 3.0) * t2 * t2;
  if (p.delta != 0.0) pr += p.delta * std::pow(rho, p.beta);
  return pr;
}

PenalizedThermo penalized_energy_entropy(const Eos& eos, double rho, double theta,
                                         double chi_xi) {
  if (rho <= 0.0) throw std::domain_error("penalized_energy_entropy: rho must be > 0");
  if (theta <= 0.0) throw std::domain_error("penalized_energy_entropy: theta must be > 0");
  const double a_eff = chi_xi * eos.params().a;
  const double t3 = theta * theta * theta;
  PenalizedThermo out;
  out.e_density = eos.energy_density_scaled(rho, theta, a_eff);
  const double Z = rho / (theta * std::sqrt(theta));
  out.s_density = rho * eos.molecular_entropy(Z) + (4.0 * a_eff / 3.0) * t3;
  return out;
}

MollifiedTransport mollified_transport(double theta, double f_omega, double chi_nu,
                                       const TransportParams& tp) {
  TransportCoeffs c = transport(theta, tp);
  return {f_omega * c.mu, f_omega * c.eta, chi_nu * c.kappa};
}

}  // namespace nsfp
