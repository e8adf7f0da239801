#include "nsfp/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nsfp/operators.hpp"

namespace nsfp {

namespace {

double s_density(const Eos& eos, double rho, double theta, double a_eff) {
  const double t3 = theta * theta * theta;
  double s = (4.0 * a_eff / 3.0) * t3;
  if (rho > 0.0) {
    const double Z = rho / (theta * std::sqrt(theta));
    s += rho * eos.molecular_entropy(Z);
  }
  return s;
}

ScalarField central_gradient_sq(const Grid& g, const ScalarField& f) {
  ScalarField out(g.size(), 0.0);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        auto d = [&](int cm, int cp, bool one_sided) {
          return (f[cp] - f[cm]) / (one_sided ? g.dx : 2.0 * g.dx);
        };
        const double gx = d(g.idx(std::max(i - 1, 0), j, k),
                            g.idx(std::min(i + 1, g.nx - 1), j, k), i == 0 || i == g.nx - 1);
        const double gy = d(g.idx(i, std::max(j - 1, 0), k),
                            g.idx(i, std::min(j + 1, g.ny - 1), k), j == 0 || j == g.ny - 1);
        double s = gx * gx + gy * gy;
        if (g.dim == 3) {
          const double gz = d(g.idx(i, j, std::max(k - 1, 0)),
                              g.idx(i, j, std::min(k + 1, g.nz - 1)), k == 0 || k == g.nz - 1);
          s += gz * gz;
        }
        out[c] = s;
      }
  return out;
}

Vec3 central_gradient_at(const Grid& g, const ScalarField& f, int i, int j, int k) {
  auto d = [&](int cm, int cp, bool one_sided) {
    return (f[cp] - f[cm]) / (one_sided ? g.dx : 2.0 * g.dx);
  };
  Vec3 out;
  out.x = d(g.idx(std::max(i - 1, 0), j, k), g.idx(std::min(i + 1, g.nx - 1), j, k),
            i == 0 || i == g.nx - 1);
  out.y = d(g.idx(i, std::max(j - 1, 0), k), g.idx(i, std::min(j + 1, g.ny - 1), k),
            j == 0 || j == g.ny - 1);
  if (g.dim == 3)
    out.z = d(g.idx(i, j, std::max(k - 1, 0)), g.idx(i, j, std::min(k + 1, g.nz - 1)),
              k == 0 || k == g.nz - 1);
  return out;
}

}  // namespace

double ballistic_energy(const Grid& g, const ScalarField& rho, const VectorField& momentum,
                        const VectorField& u, const ScalarField& theta,
                        const ScalarField& theta_tilde, const ScalarField& chi_xi,
                        const Eos& eos, const PenaltyParams& pp) {
  const double a = eos.params().a;
  const double dV = g.cell_volume();
  double acc = 0.0, comp = 0.0;
  for (int c = 0; c < g.size(); ++c) {
    const double a_eff = chi_xi[c] * a;
    double v = 0.5 * momentum.at(c).dot(u.at(c));
    v += eos.energy_density_scaled(rho[c], theta[c], a_eff);
    v -= theta_tilde[c] * s_density(eos, rho[c], theta[c], a_eff);
    if (pp.delta > 0.0 && rho[c] > 0.0)
      v += pp.delta / (pp.beta - 1.0) * pow_positive(rho[c], pp.beta);
    const double y = v * dV - comp;
    const double t = acc + y;
    comp = (t - acc) - y;
    acc = t;
  }
  return acc;
}

EntropyProduction entropy_production(const Grid& g, const VectorField& u,
                                     const ScalarField& theta, const MaskFields& masks,
                                     const TransportParams& tp) {
  EntropyProduction out;
  out.sigma.assign(g.size(), 0.0);
  out.min_cell = std::numeric_limits<double>::infinity();
  const ScalarField grad_th2 = central_gradient_sq(g, theta);
  const double dV = g.cell_volume();
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double th = theta[c];
        const TransportCoeffs tc = transport(th, tp);
        const VelGrad vg = velocity_gradient(g, u, i, j, k);
        const double diss =
            stress_dissipation(masks.f_omega[c] * tc.mu, masks.f_omega[c] * tc.eta, vg);
        const double cond = masks.chi_nu[c] * tc.kappa * grad_th2[c] / th;
        const double s = (diss + cond) / th;
        out.sigma[c] = s;
        out.total += s * dV;
        out.min_cell = std::min(out.min_cell, s);
      }
  return out;
}

SolidIntegralRates solid_integral_rates(const Grid& g, const DomainGeometry& geo,
                                        const VectorField& u, const ScalarField& theta,
                                        const MaskFields& masks, const Eos& eos,
                                        const TransportParams& tp) {
  SolidIntegralRates r;
  const double a = eos.params().a;
  const double dV = g.cell_volume();
  ScalarField log_theta(g.size());
  for (int c = 0; c < g.size(); ++c) log_theta[c] = std::log(theta[c]);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        if (geo.phi[c] <= 0.0) continue; // solid cells only
        const double th = theta[c];
        const double t2 = th * th;
        const double a_eff = masks.chi_xi[c] * a;
        const TransportCoeffs tc = transport(th, tp);
        const VelGrad vg = velocity_gradient(g, u, i, j, k);
        r.A1 += (a_eff / 3.0) * t2 * t2 * dV;
        r.A2 += stress_frobenius(masks.f_omega[c] * tc.mu, masks.f_omega[c] * tc.eta, vg) * dV;
        r.A3 += a_eff * t2 * th * (1.0 + u.at(c).norm()) * dV;
        // |grad theta| / theta evaluated as |grad log theta|, which stays
        // finite across the cold solid interior
        const Vec3 gl = central_gradient_at(g, log_theta, i, j, k);
        r.A4 += masks.chi_nu[c] * tc.kappa * gl.norm() * dV;
      }
  return r;
}

double interface_residual(const Grid& g, const DomainGeometry& geo, const VectorField& u,
                          const std::function<Vec3(const Vec3&)>& vel) {
  double acc = 0.0;
  const double dV = g.cell_volume();
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double dw = geo.delta_weight[c];
        if (dw <= 0.0) continue;
        const Vec3 n = geo.normal.at(c);
        const double mis = (u.at(c) - vel(g.center(i, j, k))).dot(n);
        acc += mis * mis * dw * dV;
      }
  return acc;
}

double dissipation_D(const Grid& g, const Stepper& st, double t, const FieldSet& f,
                     const MaskFields& masks, const DomainGeometry& geo,
                     const ScalarField& theta_tilde) {
  const TransportParams& tp = st.transport_params();
  const PenaltyParams& pp = st.penalty_params();
  const double dV = g.cell_volume();
  const ScalarField grad_th2 = central_gradient_sq(g, f.theta);
  double acc = 0.0;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double th = f.theta[c];
        const TransportCoeffs tc = transport(th, tp);
        const VelGrad vg = velocity_gradient(g, f.u, i, j, k);
        const double diss =
            stress_dissipation(masks.f_omega[c] * tc.mu, masks.f_omega[c] * tc.eta, vg);
        const double cond = masks.chi_nu[c] * tc.kappa * grad_th2[c] / th;
        acc += (theta_tilde[c] / th) * (diss + cond) * dV;
        acc += pp.lambda * pow_positive(th, pp.alpha + 1.0) * dV;
      }
  acc += interface_residual(g, geo, f.u,
                            [&](const Vec3& x) { return st.domain_velocity(t, x); }) /
         pp.eps;
  return acc;
}

double work_terms_static(const Grid& g, const Stepper& st, double t, const FieldSet& f,
                         const MaskFields& masks, const ScalarField& theta_tilde,
                         const ScalarField& dtheta_tilde_dt) {
  const Eos& eos = st.eos();
  const TransportParams& tp = st.transport_params();
  const PenaltyParams& pp = st.penalty_params();
  const double a = eos.params().a;
  const double dV = g.cell_volume();
  const double hV = 1e-6; // analytic-field gradient step

  double acc = 0.0;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const Vec3 x = g.center(i, j, k);
        const double th = f.theta[c];
        const double rho = f.rho[c];
        const double a_eff = masks.chi_xi[c] * a;

        // lambda theta^alpha theta_tilde
        double w = pp.lambda * pow_positive(th, pp.alpha) * theta_tilde[c];

        // velocity-field gradient (analytic V, finite differenced)
        double gradV[3][3];
        const Vec3 vx0 = st.domain_velocity(t, {x.x - hV, x.y, x.z});
        const Vec3 vx1 = st.domain_velocity(t, {x.x + hV, x.y, x.z});
        const Vec3 vy0 = st.domain_velocity(t, {x.x, x.y - hV, x.z});
        const Vec3 vy1 = st.domain_velocity(t, {x.x, x.y + hV, x.z});
        const Vec3 vz0 = st.domain_velocity(t, {x.x, x.y, x.z - hV});
        const Vec3 vz1 = st.domain_velocity(t, {x.x, x.y, x.z + hV});
        const Vec3 dvx = (vx1 - vx0) * (0.5 / hV);
        const Vec3 dvy = (vy1 - vy0) * (0.5 / hV);
        const Vec3 dvz = (vz1 - vz0) * (0.5 / hV);
        gradV[0][0] = dvx.x; gradV[1][0] = dvx.y; gradV[2][0] = dvx.z;
        gradV[0][1] = dvy.x; gradV[1][1] = dvy.y; gradV[2][1] = dvy.z;
        gradV[0][2] = dvz.x; gradV[1][2] = dvz.y; gradV[2][2] = dvz.z;
        const double divV = gradV[0][0] + gradV[1][1] + gradV[2][2];
        const Vec3 V = st.domain_velocity(t, x);

        // - rho grad Psi . V
        const Vec3 gPsi = central_gradient_at(g, f.Psi, i, j, k);
        w -= rho * gPsi.dot(V);

        // - (rho u (x) u : grad V - S_omega : grad V + p_penalized div V)
        const Vec3 u = f.u.at(c);
        const Vec3 m = f.momentum.at(c);
        double uu_gradV = 0.0;
        const double mc[3] = {m.x, m.y, m.z};
        const double uc[3] = {u.x, u.y, u.z};
        for (int aax = 0; aax < 3; ++aax)
          for (int b = 0; b < 3; ++b) uu_gradV += mc[aax] * uc[b] * gradV[aax][b];
        const TransportCoeffs tc = transport(th, tp);
        const double mu_w = masks.f_omega[c] * tc.mu;
        const double eta_w = masks.f_omega[c] * tc.eta;
        const VelGrad vg = velocity_gradient(g, f.u, i, j, k);
        double S_gradV = 0.0;
        for (int aax = 0; aax < 3; ++aax)
          for (int b = 0; b < 3; ++b) {
            double s = mu_w * (vg.g[aax][b] + vg.g[b][aax]);
            if (aax == b) s += -mu_w * (2.0 / 3.0) * vg.div + eta_w * vg.div;
            S_gradV += s * gradV[aax][b];
          }
        const double press = penalized_pressure(eos, rho, th, masks.chi_xi[c], pp);
        w -= uu_gradV - S_gradV + press * divV;

        // - [ rho s_xi (dt theta_tilde + u . grad theta_tilde)
        //     - (kappa_nu/theta) grad theta . grad theta_tilde ]
        const Vec3 gtt = central_gradient_at(g, theta_tilde, i, j, k);
        const double sdens = s_density(eos, rho, th, a_eff);
        const Vec3 gth = central_gradient_at(g, f.theta, i, j, k);
        const double kap = masks.chi_nu[c] * tc.kappa;
        w -= sdens * (dtheta_tilde_dt[c] + u.dot(gtt)) - (kap / th) * gth.dot(gtt);

        acc += w * dV;
      }
  return acc;
}

double renormalized_residual(const Grid& g, const ScalarField& rho0,
                             const ScalarField& rho1, const VectorField& u,
                             const ScalarField& fluid_indicator, double dt,
                             const Vec3& bump_center, double bump_radius,
                             RenormChoice choice) {
  // b(rho) = min(rho, 1); B(rho) = log rho (rho <= 1), 1 - 1/rho (rho > 1).
  // With b == 0 we take B == 1, so rho B(rho) tests plain continuity.
  const bool zero = choice == RenormChoice::Zero;
  auto rhoB = [zero](double r) {
    if (zero) return r;
    if (r <= 1e-300) return 0.0;
    return r <= 1.0 ? r * std::log(r) : r - 1.0;
  };
  auto bfun = [zero](double r) { return zero ? 0.0 : std::min(r, 1.0); };
  auto bump = [&](const Vec3& x) {
    const double r = (x - bump_center).norm() / bump_radius;
    if (r >= 1.0) return 0.0;
    const double c = std::cos(0.5 * M_PI * r);
    return c * c;
  };
  auto bump_grad = [&](const Vec3& x) {
    const Vec3 d = x - bump_center;
    const double r = d.norm() / bump_radius;
    if (r >= 1.0 || r < 1e-12) return Vec3{};
    const double c = std::cos(0.5 * M_PI * r), s = std::sin(0.5 * M_PI * r);
    const double dpsi_dr = -M_PI * c * s / bump_radius;
    return d * (dpsi_dr / (r * bump_radius));
  };

  const double dV = g.cell_volume();
  double acc = 0.0;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        if (fluid_indicator[c] == 0.0) continue;
        const Vec3 x = g.center(i, j, k);
        const double psi = bump(x);
        double term = 0.0;
        if (psi > 0.0) term += (rhoB(rho1[c]) - rhoB(rho0[c])) / dt * psi;
        const Vec3 gpsi = bump_grad(x);
        term -= rhoB(rho0[c]) * u.at(c).dot(gpsi);
        const VelGrad vg = velocity_gradient(g, u, i, j, k);
        term += bfun(rho0[c]) * vg.div * psi;
        acc += term * dV;
      }
  return acc;
}

std::vector<HelmholtzCoercivityResult> helmholtz_coercivity(
    const Eos& eos, const std::vector<double>& theta_tilde_values, double rho_bar,
    const AuditGrid& grid, double tolerance) {
  std::vector<HelmholtzCoercivityResult> out;
  const double a = eos.params().a;
  auto H = [&](double rho, double theta, double tt) {
    return eos.energy_density_scaled(rho, theta, a) - tt * s_density(eos, rho, theta, a);
  };
  const auto rhos = grid.rho_samples();
  const auto thetas = grid.theta_samples();
  for (double tt : theta_tilde_values) {
    HelmholtzCoercivityResult r;
    r.theta_tilde = tt;
    const double h = 1e-6 * rho_bar;
    const double dH = (H(rho_bar + h, tt, tt) - H(rho_bar - h, tt, tt)) / (2.0 * h);
    const double H0 = H(rho_bar, tt, tt);
    r.min_value = std::numeric_limits<double>::infinity();
    for (double rho : rhos)
      for (double theta : thetas) {
        const double rel = H(rho, theta, tt) - (rho - rho_bar) * dH - H0;
        if (rel < r.min_value) {
          r.min_value = rel;
          r.arg_rho = rho;
          r.arg_theta = theta;
        }
      }
    // include the reference point itself (the analytic minimizer)
    const double rel0 = H(rho_bar, tt, tt) - 0.0 - H0;
    if (rel0 < r.min_value) {
      r.min_value = rel0;
      r.arg_rho = rho_bar;
      r.arg_theta = tt;
    }
    r.pass = r.min_value >= -tolerance;
    out.push_back(r);
  }
  return out;
}

DiagnosticsRecord collect_record(const Stepper& st) {
  const Grid& g = st.grid();
  const FieldSet& f = st.fields();
  const MaskFields& masks = st.masks();
  const DomainGeometry& geo = st.geometry();
  const Eos& eos = st.eos();
  const PenaltyParams& pp = st.penalty_params();
  const double dV = g.cell_volume();

  DiagnosticsRecord r;
  r.t = st.time();
  r.mass = st.total_mass();

  double ke = 0.0;
  Vec3 mom{};
  double internal = 0.0, rho53 = 0.0, sink = 0.0, rsu = 0.0, dp = 0.0, solid_mass = 0.0;
  for (int c = 0; c < g.size(); ++c) {
    ke += 0.5 * f.momentum.at(c).dot(f.u.at(c)) * dV;
    mom = mom + f.momentum.at(c) * dV;
    internal += f.Eint[c] * dV;
    rho53 += pow_positive(f.rho[c], 5.0 / 3.0) * dV;
    sink += pp.lambda * pow_positive(f.theta[c], pp.alpha + 1.0) * dV;
    rsu += std::abs(s_density(eos, f.rho[c], f.theta[c], masks.chi_xi[c] * eos.params().a)) *
           f.u.at(c).norm() * dV;
    if (pp.delta > 0.0 && f.rho[c] > 0.0)
      dp += pp.delta / (pp.beta - 1.0) * pow_positive(f.rho[c], pp.beta) * dV;
    if (geo.phi[c] > 0.0) solid_mass += f.rho[c] * dV;
  }
  r.kinetic = ke;
  r.momentum = mom;
  r.internal = internal;
  r.rho_L53 = rho53;
  r.sink_L1 = sink;
  r.rho_s_u_L1 = rsu;
  r.delta_pressure = dp;
  r.solid_mass = solid_mass;

  r.ballistic = ballistic_energy(g, f.rho, f.momentum, f.u, f.theta, f.theta_tilde,
                                 masks.chi_xi, eos, pp);
  r.dissipation = dissipation_D(g, st, st.time(), f, masks, geo, f.theta_tilde);

  EntropyProduction sp = entropy_production(g, f.u, f.theta, masks, st.transport_params());
  r.sigma_total = sp.total;
  r.sigma_min = sp.min_cell;

  const double t = st.time();
  r.penalty_residual = interface_residual(
      g, geo, f.u, [&](const Vec3& x) { return st.domain_velocity(t, x); });

  SolidIntegralRates rates =
      solid_integral_rates(g, geo, f.u, f.theta, masks, eos, st.transport_params());
  r.A1_rate = rates.A1;
  r.A2_rate = rates.A2;
  r.A3_rate = rates.A3;
  r.A4_rate = rates.A4;

  // theta^{alpha/2} gradient norm
  ScalarField th_a2(g.size());
  const double half_alpha = 0.5 * pp.alpha;
  for (int c = 0; c < g.size(); ++c) th_a2[c] = pow_positive(f.theta[c], half_alpha);
  const ScalarField g2 = central_gradient_sq(g, th_a2);
  double ga = 0.0;
  for (int c = 0; c < g.size(); ++c) ga += g2[c] * dV;
  r.grad_theta_a2 = ga;

  const ScalarField psi_g2 = central_gradient_sq(g, f.Psi);
  double w12 = 0.0, rho65 = 0.0;
  for (int c = 0; c < g.size(); ++c) {
    w12 += (f.Psi[c] * f.Psi[c] + psi_g2[c]) * dV;
    rho65 += pow_positive(f.rho[c], 6.0 / 5.0) * dV;
  }
  r.psi_W12 = std::sqrt(w12);
  const double rho_l65 = std::pow(rho65, 5.0 / 6.0);
  r.poisson_ratio = rho_l65 > 0.0 ? r.psi_W12 / rho_l65 : 0.0;

  return r;
}

std::vector<MonitorGrowth> monitor_growth(const std::vector<DiagnosticsRecord>& records) {
  std::vector<MonitorGrowth> out;
  if (records.size() < 8) return out;
  auto probe = [&](const std::string& name, auto getter) {
    const std::size_t nrec = records.size();
    const std::size_t half = nrec / 2;
    auto slope = [&](std::size_t b, std::size_t e) {
      const double dtspan = records[e - 1].t - records[b].t;
      if (dtspan <= 0.0) return 0.0;
      return (getter(records[e - 1]) - getter(records[b])) / dtspan;
    };
    MonitorGrowth m;
    m.name = name;
    m.early_slope = slope(0, half);
    m.late_slope = slope(half, nrec);
    const double scale = std::abs(getter(records[0])) + std::abs(getter(records[nrec - 1]));
    m.superlinear = m.late_slope > 2.0 * std::max(m.early_slope, 0.0) + 1e-9 * scale &&
                    m.late_slope > 0.0 && m.early_slope > 0.0;
    out.push_back(m);
  };
  probe("rho_L53", [](const DiagnosticsRecord& r) { return r.rho_L53; });
  probe("sink_L1", [](const DiagnosticsRecord& r) { return r.sink_L1; });
  probe("grad_theta_a2", [](const DiagnosticsRecord& r) { return r.grad_theta_a2; });
  probe("psi_W12", [](const DiagnosticsRecord& r) { return r.psi_W12; });
  probe("rho_s_u_L1", [](const DiagnosticsRecord& r) { return r.rho_s_u_L1; });
  return out;
}

std::string DiagnosticsRecord::csv_header() {
  return "t,dt,mass,mom_x,mom_y,mom_z,kinetic,internal,ballistic,dissipation,work,"
         "residual,sigma_total,sigma_min,penalty_residual,solid_mass,A1,A2,A3,A4,"
         "A1_rate,A2_rate,A3_rate,A4_rate,rho_L53,sink_L1,grad_theta_a2,psi_W12,"
         "rho_s_u_L1,poisson_ratio,delta_pressure,renorm_residual,swept_mass,"
         "poisson_iters";
}

std::string DiagnosticsRecord::csv_row() const {
  char buf[1600];
  std::snprintf(
      buf, sizeof buf,
      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d",
      t, dt, mass, momentum.x, momentum.y, momentum.z, kinetic, internal, ballistic,
      dissipation, work, residual, sigma_total, sigma_min, penalty_residual, solid_mass,
      A1, A2, A3, A4, A1_rate, A2_rate, A3_rate, A4_rate, rho_L53, sink_L1, grad_theta_a2,
      psi_W12, rho_s_u_L1, poisson_ratio, delta_pressure, renorm_residual, swept_mass,
      poisson_iters);
  return std::string(buf);
}

}  // namespace nsfp
