#include "nsfp/eos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nsfp/operators.hpp"

namespace nsfp {

namespace {

double pow53(double x) { return std::cbrt(x * x * x * x * x); } // x^{5/3}
double pow23(double x) { return std::cbrt(x * x); }             // x^{2/3}

}  // namespace

TransportCoeffs transport(double theta, const TransportParams& tp) {
  if (theta < 0.0) throw std::domain_error("transport: theta must be >= 0");
  TransportCoeffs c;
  c.mu = tp.mu_lo * (1.0 + theta);
  c.eta = tp.eta_lo * (1.0 + theta);
  c.kappa = tp.kappa_lo * (1.0 + pow_positive(theta, tp.alpha));
  return c;
}

Eos::Eos(EosParams p) : params_(p) { params_.validate(); }

Eos::Eos(EosParams p, std::function<PEval(double)> custom_P)
    : params_(p), custom_P_(std::move(custom_P)) {
  params_.validate();
}

PEval Eos::structural_P(double Z) const {
  if (Z < 0.0) throw std::domain_error("structural_P: Z must be >= 0");
  if (custom_P_) return custom_P_(Z);
  PEval r;
  const double z53 = pow53(Z);
  const double denom = 1.0 + Z;
  r.value = params_.p_inf * z53 + Z / denom;
  r.deriv = (5.0 / 3.0) * params_.p_inf * pow23(Z) + 1.0 / (denom * denom);
  return r;
}

double Eos::molecular_pressure(double rho, double theta) const {
  if (theta <= 0.0) throw std::domain_error("pressure: theta must be > 0");
  if (rho < 0.0) throw std::domain_error("pressure: rho must be >= 0");
  if (rho == 0.0) return 0.0;
  const double th32 = theta * std::sqrt(theta);
  const double Z = rho / th32;
  if (!custom_P_) {
    // theta^{5/2} P(Z) expanded for the default profile; this form stays
    // cancellation-free deep in the degenerate regime
    return params_.p_inf * pow53(rho) + rho * theta / (1.0 + Z);
  }
  return theta * th32 * structural_P(Z).value; // theta^{5/2} P(Z)
}

double Eos::pressure(double rho, double theta) const {
  const double t2 = theta * theta;
  return molecular_pressure(rho, theta) + (params_.a / 3.0) * t2 * t2;
}

double Eos::energy_density_scaled(double rho, double theta, double a_eff) const {
  if (theta <= 0.0) throw std::domain_error("internal_energy: theta must be > 0");
  const double t2 = theta * theta;
  return 1.5 * molecular_pressure(rho, theta) + a_eff * t2 * t2;
}

double Eos::energy_density(double rho, double theta) const {
  return energy_density_scaled(rho, theta, params_.a);
}

double Eos::internal_energy(double rho, double theta) const {
  if (rho <= 0.0) throw std::domain_error("internal_energy: rho must be > 0");
  return energy_density(rho, theta) / rho;
}

double Eos::molecular_entropy(double Z) const {
  if (Z <= 0.0) throw std::domain_error("entropy: Z must be > 0");
  if (custom_P_) return entropy_by_quadrature(Z);
  return std::log1p(1.0 / Z) + 1.5 / (1.0 + Z);
}

double Eos::entropy_by_quadrature(double Z) const {
  // S(Z) = int_Z^inf (3/2) [(5/3)P(z) - z P'(z)] / z^2 dz, substituted u = 1/z
  // so the integrand stays bounded on (0, 1/Z].  Beyond z_cap the bracket
  // suffers severe cancellation when P grows like z^{5/3}; the integrand is
  // nearly constant there and the tail is closed by a rectangle estimate.
  const double z_cap = 1e7;
  auto g = [&](double u) {
    const double z = 1.0 / u;
    PEval p = structural_P(z);
    return 1.5 * ((5.0 / 3.0) * p.value - z * p.deriv);
  };
  const double u_hi = 1.0 / Z;
  const double u_lo = 1.0 / z_cap;
  if (u_hi <= u_lo) return g(u_hi) * u_hi; // deep tail: rectangle only

  // adaptive Simpson on [u_lo, u_hi] plus the tail rectangle
  struct Rec {
    double a, b, fa, fm, fb, whole;
  };
  auto simpson = [&](double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  };
  double fa = g(u_lo), fb = g(u_hi), fm = g(0.5 * (u_lo + u_hi));
  std::vector<Rec> stack{{u_lo, u_hi, fa, fm, fb, simpson(u_lo, u_hi, fa, fm, fb)}};
  double total = fa * u_lo; // tail [0, u_lo]
  const double tol = 1e-12;
  int guard = 0;
  while (!stack.empty()) {
    if (++guard > 200000) throw NumericalError("entropy quadrature failed to converge");
    Rec r = stack.back();
    stack.pop_back();
    const double m = 0.5 * (r.a + r.b);
    const double lm = 0.5 * (r.a + m), rm = 0.5 * (m + r.b);
    const double flm = g(lm), frm = g(rm);
    const double left = simpson(r.a, m, r.fa, flm, r.fm);
    const double right = simpson(m, r.b, r.fm, frm, r.fb);
    if (std::abs(left + right - r.whole) < 15.0 * tol * std::max(1.0, std::abs(left + right)) ||
        (r.b - r.a) < 1e-12 * u_hi) {
      total += left + right + (left + right - r.whole) / 15.0;
    } else {
      stack.push_back({r.a, m, r.fa, flm, r.fm, left});
      stack.push_back({m, r.b, r.fm, frm, r.fb, right});
    }
  }
  return total;
}

double Eos::entropy(double rho, double theta) const {
  if (rho <= 0.0) throw std::domain_error("entropy: rho must be > 0");
  if (theta <= 0.0) throw std::domain_error("entropy: theta must be > 0");
  const double Z = rho / (theta * std::sqrt(theta));
  const double t3 = theta * theta * theta;
  return molecular_entropy(Z) + (4.0 * params_.a / 3.0) * t3 / rho;
}

double Eos::energy_density_dtheta(double rho, double theta, double a_eff) const {
  // d(rho e_M)/d(theta) = (9/4) [(5/3)P(Z) - Z P'(Z)] theta^{3/2}, plus the
  // radiative 4 a_eff theta^3.
  const double t3 = theta * theta * theta;
  double dm = 0.0;
  if (rho > 0.0) {
    const double Z = rho / (theta * std::sqrt(theta));
    if (!custom_P_) {
      // the p_inf parts cancel identically for the default profile
      dm = 2.25 * rho * (2.0 / 3.0 + (5.0 / 3.0) * Z) / ((1.0 + Z) * (1.0 + Z));
    } else {
      PEval p = structural_P(Z);
      dm = 2.25 * ((5.0 / 3.0) * p.value - Z * p.deriv) * (rho / Z); // rho/Z = theta^{3/2}
    }
  }
  return dm + 4.0 * a_eff * t3;
}

double Eos::zero_temperature_energy(double rho) const {
  return 1.5 * params_.p_inf * pow53(rho);
}

double Eos::invert_internal_energy(double rho, double E, double a_eff) const {
  if (rho < 0.0) throw std::domain_error("invert_internal_energy: rho must be >= 0");
  if (rho == 0.0) {
    if (a_eff <= 0.0 || E <= 0.0)
      throw std::domain_error("invert_internal_energy: vacuum cell needs radiation energy");
    return std::sqrt(std::sqrt(E / a_eff));
  }
  const double E0 = zero_temperature_energy(rho);
  if (!(E > E0))
    throw std::domain_error("invert_internal_energy: E below zero-temperature energy");

  auto f = [&](double th) { return energy_density_scaled(rho, th, a_eff) - E; };

  // bracket the root
  double lo = 1e-14, hi = 1.0;
  while (f(hi) < 0.0) {
    hi *= 4.0;
    if (hi > 1e60) throw NumericalError("invert_internal_energy: no upper bracket");
  }
  while (f(lo) > 0.0) {
    lo *= 0.25;
    if (lo < 1e-300) throw NumericalError("invert_internal_energy: no lower bracket");
  }

  double theta = std::clamp(std::sqrt(lo * hi), lo, hi);
  const double tol = 1e-12 * E;
  bool residual_ok = false;
  for (int it = 0; it < 200; ++it) {
    const double r = f(theta);
    residual_ok = std::abs(r) <= tol;
    if (r > 0.0)
      hi = theta;
    else
      lo = theta;
    const double d = energy_density_dtheta(rho, theta, a_eff);
    double next = theta - r / d;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi); // bisection fallback
    // iterate past the residual tolerance until theta itself settles
    if (residual_ok && std::abs(next - theta) <= 4.0 * 2.2e-16 * theta) return next;
    theta = next;
  }
  if (residual_ok) return theta;
  throw NumericalError("invert_internal_energy: no convergence in 200 iterations");
}

double Eos::thermal_pressure(double rho, double theta) const {
  const double t2 = theta * theta;
  const double rad = (params_.a / 3.0) * t2 * t2;
  if (rho <= 0.0) return rad;
  if (!custom_P_) {
    const double Z = rho / (theta * std::sqrt(theta));
    return rho * theta / (1.0 + Z) + rad;
  }
  return molecular_pressure(rho, theta) - params_.p_inf * pow53(rho) + rad;
}

double Eos::thermal_energy_density(double rho, double theta, double a_eff) const {
  const double t2 = theta * theta;
  const double rad = a_eff * t2 * t2;
  if (rho <= 0.0) return rad;
  if (!custom_P_) {
    const double Z = rho / (theta * std::sqrt(theta));
    return 1.5 * rho * theta / (1.0 + Z) + rad;
  }
  return energy_density_scaled(rho, theta, a_eff) - zero_temperature_energy(rho);
}

double Eos::sound_speed_sq(double rho, double theta) const {
  if (rho <= 0.0) return 0.0;
  const double Z = rho / (theta * std::sqrt(theta));
  if (!custom_P_) {
    const double denom = 1.0 + Z;
    return (5.0 / 3.0) * params_.p_inf * pow23(rho) + theta / (denom * denom);
  }
  return theta * structural_P(Z).deriv; // d p_M / d rho = theta P'(Z)
}

std::vector<double> AuditGrid::rho_samples() const {
  std::vector<double> v(n_rho);
  const double l0 = std::log(rho_min), l1 = std::log(rho_max);
  for (int i = 0; i < n_rho; ++i)
    v[i] = std::exp(l0 + (l1 - l0) * i / double(n_rho - 1));
  return v;
}

std::vector<double> AuditGrid::theta_samples() const {
  std::vector<double> v(n_theta);
  const double l0 = std::log(theta_min), l1 = std::log(theta_max);
  for (int i = 0; i < n_theta; ++i)
    v[i] = std::exp(l0 + (l1 - l0) * i / double(n_theta - 1));
  return v;
}

namespace {

// central-difference helpers with relative step 1e-5, per the audit contract;
// differences below a few ulps of the function scale are reported as exact
// zeros rather than amplified rounding noise (the degenerate corner of the
// state grid has theta-signals far below the ulp of the polytropic part)
constexpr double kFdStep = 1e-5;

double gated_diff(double f1, double f2) {
  const double d = f1 - f2;
  if (std::abs(d) <= 4.0 * 2.2e-16 * (std::abs(f1) + std::abs(f2))) return 0.0;
  return d;
}

double d_rho(const std::function<double(double, double)>& f, double rho, double theta) {
  const double h = kFdStep * rho;
  return gated_diff(f(rho + h, theta), f(rho - h, theta)) / (2.0 * h);
}

double d_theta(const std::function<double(double, double)>& f, double rho, double theta) {
  const double h = kFdStep * theta;
  return gated_diff(f(rho, theta + h), f(rho, theta - h)) / (2.0 * h);
}

// golden-section maximization of a unimodal-ish profile on [lo, hi] (log axis)
double maximize_log_axis(const std::function<double(double)>& f, double lo, double hi) {
  double a = std::log(lo), b = std::log(hi);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(std::exp(c)), fd = f(std::exp(d));
  for (int it = 0; it < 200; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(std::exp(d));
    }
    if (b - a < 1e-12) break;
  }
  return std::max(fc, fd);
}

}  // namespace

AuditReport hypothesis_audit(const Eos& eos, const TransportParams& tp,
                             const AuditGrid& grid) {
  AuditReport rep;
  const auto rhos = grid.rho_samples();
  const auto thetas = grid.theta_samples();
  if (rhos.empty() || thetas.empty())
    throw ConfigError("hypothesis_audit: empty audit grid");
  const EosParams& ep = eos.params();

  auto pm = [&](double r, double t) { return eos.molecular_pressure(r, t); };
  auto em = [&](double r, double t) { return 1.5 * eos.molecular_pressure(r, t) / r; };

  // -- d p_M / d rho > 0 (a gated zero means below finite-difference resolution)
  {
    AuditCheck c{"dpM_drho_positive", true, std::numeric_limits<double>::infinity(), 0, 0, ""};
    for (double r : rhos)
      for (double t : thetas) {
        const double d = d_rho(pm, r, t);
        if (d < c.witnessed) {
          c.witnessed = d;
          c.worst_rho = r;
          c.worst_theta = t;
        }
        if (d < 0.0) c.pass = false;
      }
    c.note = "min central-difference d p_M/d rho";
    rep.checks.push_back(c);
  }

  // -- 0 < d e_M / d theta <= c, witnessed c refined by 1-D maximization over Z
  {
    AuditCheck c{"deM_dtheta_bounded", true, 0.0, 0, 0, ""};
    double lo = std::numeric_limits<double>::infinity();
    for (double r : rhos)
      for (double t : thetas) {
        const double d = d_theta(em, r, t);
        if (d < 0.0) {
          c.pass = false;
          c.worst_rho = r;
          c.worst_theta = t;
        }
        lo = std::min(lo, d);
        c.witnessed = std::max(c.witnessed, d);
      }
    // d e_M/d theta depends on Z only; refine the witnessed bound over the
    // whole Z-range the grid spans.
    const double zmin = grid.rho_min / std::pow(grid.theta_max, 1.5);
    const double zmax = grid.rho_max / std::pow(grid.theta_min, 1.5);
    auto along_z = [&](double Z) {
      const double theta = 1.0, rho = Z; // Z = rho at theta = 1
      return d_theta(em, rho, theta);
    };
    c.witnessed = std::max(c.witnessed, maximize_log_axis(along_z, zmin, zmax));
    std::ostringstream os;
    os << "min " << lo;
    c.note = os.str();
    rep.checks.push_back(c);
  }

  // -- |rho d e_M / d rho| <= c e_M
  {
    AuditCheck c{"rho_deM_drho_bounded", true, 0.0, 0, 0, "witnessed ratio bound"};
    for (double r : rhos)
      for (double t : thetas) {
        const double ratio = std::abs(r * d_rho(em, r, t)) / em(r, t);
        if (ratio > c.witnessed) {
          c.witnessed = ratio;
          c.worst_rho = r;
          c.worst_theta = t;
        }
        if (!std::isfinite(ratio)) c.pass = false;
      }
    rep.checks.push_back(c);
  }

  // -- P(0) = 0, P'(0) > 0, P' > 0 on the sampled Z range
  {
    AuditCheck c{"P_structure", true, 0.0, 0, 0, ""};
    PEval p0 = eos.structural_P(0.0);
    if (std::abs(p0.value) > 1e-14 || !(p0.deriv > 0.0)) c.pass = false;
    c.witnessed = p0.deriv;
    for (double r : rhos)
      for (double t : thetas) {
        const double Z = r / (t * std::sqrt(t));
        if (!(eos.structural_P(Z).deriv > 0.0)) {
          c.pass = false;
          c.worst_rho = r;
          c.worst_theta = t;
        }
      }
    c.note = "P(0)=0, P'(0)>0, P'>0; witnessed P'(0)";
    rep.checks.push_back(c);
  }

  // -- degenerate limit P(Z)/Z^{5/3} -> p_inf
  {
    AuditCheck c{"degenerate_limit", true, 0.0, 0, 0, "P/Z^{5/3} at Z = 1e6"};
    const double Z = 1e6;
    const double ratio = eos.structural_P(Z).value / std::pow(Z, 5.0 / 3.0);
    c.witnessed = ratio;
    if (std::abs(ratio - ep.p_inf) > 1e-3 * ep.p_inf) c.pass = false;
    rep.checks.push_back(c);
  }

  // -- S strictly decreasing and third law S(inf) = 0
  {
    AuditCheck c{"entropy_monotone_third_law", true, 0.0, 0, 0, ""};
    std::vector<double> zs;
    for (double r : rhos)
      for (double t : thetas) zs.push_back(r / (t * std::sqrt(t)));
    std::sort(zs.begin(), zs.end());
    // drop near-collisions: strict monotonicity is only meaningful across
    // genuinely separated arguments
    std::vector<double> zsep{zs.front()};
    for (double z : zs)
      if (z > zsep.back() * (1.0 + 1e-9)) zsep.push_back(z);
    double prev = eos.molecular_entropy(zsep.front());
    for (std::size_t i = 1; i < zsep.size(); ++i) {
      const double s = eos.molecular_entropy(zsep[i]);
      if (!(s < prev)) c.pass = false;
      prev = s;
    }
    const double tail = eos.molecular_entropy(1e6);
    const double ref = eos.molecular_entropy(1.0);
    c.witnessed = tail / ref;
    if (!(tail < 2e-3 * ref)) c.pass = false;
    c.note = "S(1e6)/S(1)";
    rep.checks.push_back(c);
  }

  // -- Gibbs residuals under central differences; the theta-derivatives of
  //    e and p are differenced on their thermal parts (identical derivatives,
  //    no theta-independent polytropic offset drowning the signal)
  {
    AuditCheck c{"gibbs_consistency", true, 0.0, 0, 0, "max relative residual"};
    auto s_full = [&](double r, double t) { return eos.entropy(r, t); };
    auto e_th = [&](double r, double t) {
      return eos.thermal_energy_density(r, t, ep.a) / r;
    };
    auto p_th = [&](double r, double t) { return eos.thermal_pressure(r, t); };
    for (double r : rhos)
      for (double t : thetas) {
        const double ds_dt = d_theta(s_full, r, t);
        const double de_dt = d_theta(e_th, r, t);
        const double r1 = std::abs(t * ds_dt - de_dt) / (1.0 + std::abs(de_dt));
        const double ds_dr = d_rho(s_full, r, t);
        const double dp_dt = d_theta(p_th, r, t);
        const double r2 =
            std::abs(ds_dr + dp_dt / (r * r)) / (1.0 + std::abs(dp_dt) / (r * r));
        const double worst = std::max(r1, r2);
        if (worst > c.witnessed) {
          c.witnessed = worst;
          c.worst_rho = r;
          c.worst_theta = t;
        }
        if (worst > 1e-6) c.pass = false;
      }
    rep.checks.push_back(c);
  }

  // -- coercivity rho e >= a theta^4 + (3/2) p_inf rho^{5/3}
  {
    AuditCheck c{"energy_coercivity", true, 0.0, 0, 0, "min slack / rho e"};
    c.witnessed = std::numeric_limits<double>::infinity();
    for (double r : rhos)
      for (double t : thetas) {
        const double E = eos.energy_density(r, t);
        const double t2 = t * t;
        const double slack = E - ep.a * t2 * t2 - eos.zero_temperature_energy(r);
        const double rel = slack / E;
        if (rel < c.witnessed) {
          c.witnessed = rel;
          c.worst_rho = r;
          c.worst_theta = t;
        }
        if (slack < -1e-12 * E) c.pass = false;
      }
    rep.checks.push_back(c);
  }

  // -- molecular-pressure sandwich (envelope constants witnessed)
  {
    AuditCheck c{"molecular_pressure_sandwich", true, 0.0, 0, 0, ""};
    double lo_ideal = std::numeric_limits<double>::infinity(), hi_ideal = 0.0;
    double lo_deg = std::numeric_limits<double>::infinity(), hi_deg = 0.0;
    for (double r : rhos)
      for (double t : thetas) {
        const double Z = r / (t * std::sqrt(t));
        const double p = pm(r, t);
        if (Z < ep.z_hi) {
          const double ratio = p / (r * t);
          lo_ideal = std::min(lo_ideal, ratio);
          hi_ideal = std::max(hi_ideal, ratio);
        } else {
          const double ratio = p / std::pow(r, 5.0 / 3.0);
          lo_deg = std::min(lo_deg, ratio);
          hi_deg = std::max(hi_deg, ratio);
        }
      }
    if (!(lo_ideal > 0.0) || !std::isfinite(hi_ideal)) c.pass = false;
    if (!(lo_deg > 0.0) || !std::isfinite(hi_deg)) c.pass = false;
    c.witnessed = hi_ideal / lo_ideal;
    std::ostringstream os;
    os << "ideal band p_M/(rho theta) in [" << lo_ideal << ", " << hi_ideal
       << "], degenerate p_M/rho^{5/3} in [" << lo_deg << ", " << hi_deg << "]";
    c.note = os.str();
    rep.checks.push_back(c);
  }

  // -- transport envelopes
  {
    AuditCheck c{"transport_envelopes", true, 0.0, 0, 0, ""};
    for (double t : thetas) {
      TransportCoeffs tc = transport(t, tp);
      const double ta = std::pow(t, tp.alpha);
      if (!(tp.mu_lo * (1.0 + t) <= tc.mu * (1.0 + 1e-14) &&
            tc.mu <= tp.mu_hi * (1.0 + t) * (1.0 + 1e-14)))
        c.pass = false;
      if (!(tp.eta_lo * (1.0 + t) <= tc.eta * (1.0 + 1e-14) &&
            tc.eta <= tp.eta_hi * (1.0 + t) * (1.0 + 1e-14)))
        c.pass = false;
      if (!(tp.kappa_lo * (1.0 + ta) <= tc.kappa * (1.0 + 1e-14) &&
            tc.kappa <= tp.kappa_hi * (1.0 + ta) * (1.0 + 1e-14)))
        c.pass = false;
      if (!c.pass && c.worst_theta == 0.0) c.worst_theta = t;
    }
    // |mu'| bound witnessed by forward differences on the theta samples
    double mmax = 0.0;
    for (std::size_t i = 0; i + 1 < thetas.size(); ++i) {
      const double d = std::abs(transport(thetas[i + 1], tp).mu - transport(thetas[i], tp).mu) /
                       (thetas[i + 1] - thetas[i]);
      mmax = std::max(mmax, d);
    }
    c.witnessed = mmax;
    c.note = "witnessed sup |mu'|";
    rep.checks.push_back(c);
  }

  return rep;
}

std::string AuditReport::format() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  witnessed=" << c.witnessed
       << "  worst=(" << c.worst_rho << ", " << c.worst_theta << ")";
    if (!c.note.empty()) os << "  [" << c.note << "]";
    os << "\n";
  }
  os << (all_pass() ? "audit: ALL CHECKS PASS" : "audit: FAILURES PRESENT") << "\n";
  return os.str();
}

}  // namespace nsfp
