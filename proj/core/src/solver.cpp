#include "nsfp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nsfp/operators.hpp"

namespace nsfp {

namespace {

// CFL-type rejection: advance() restores the state and halves dt.
struct StepRejected : NumericalError {
  explicit StepRejected(const std::string& msg) : NumericalError(msg) {}
};

double harmonic_mean(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

}  // namespace

ScalarField harmonic_extension(const Grid& g, const ScalarField& phi,
                               const std::function<double(const Vec3&)>& theta_B,
                               const ScalarField* warm_start, double tol, int max_iter) {
  const int N = g.size();
  ScalarField th = warm_start && static_cast<int>(warm_start->size()) == N
                       ? *warm_start
                       : ScalarField(N, theta_B(Vec3{0, 0, 0}));

  // Per-cell cut-stencil data: for each neighbor direction either a grid link
  // or a Dirichlet value at a sub-cell distance along the axis.
  struct Link {
    int nb = -1;       // neighbor cell, or -1 for a wall mirror
    double s = 1.0;    // spacing in units of dx
    double bval = 0.0; // Dirichlet value when cut
    bool cut = false;
  };
  const int ndir = g.dim == 3 ? 6 : 4;
  std::vector<Link> links(static_cast<std::size_t>(N) * ndir);
  bool any_cut = false;
  // grazing cuts only strengthen the diagonal under relaxation, so the guard
  // can sit at rounding scale without hurting conditioning
  const double smin = 1e-8;

  const int di[6] = {-1, 1, 0, 0, 0, 0};
  const int dj[6] = {0, 0, -1, 1, 0, 0};
  const int dk[6] = {0, 0, 0, 0, -1, 1};
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        for (int q = 0; q < ndir; ++q) {
          Link& L = links[static_cast<std::size_t>(c) * ndir + q];
          const int ii = i + di[q], jj = j + dj[q], kk = k + dk[q];
          if (ii < 0 || jj < 0 || kk < 0 || ii >= g.nx || jj >= g.ny || kk >= g.nz) {
            L.nb = -1; // zero-flux wall mirror
            continue;
          }
          const int nb = g.idx(ii, jj, kk);
          const double pc = phi[c], pn = phi[nb];
          if ((pc > 0.0) != (pn > 0.0)) {
            double s = pc / (pc - pn);
            s = std::clamp(s, smin, 1.0);
            L.cut = true;
            L.s = s;
            const Vec3 xc = g.center(i, j, k);
            const Vec3 xb{xc.x + di[q] * s * g.dx, xc.y + dj[q] * s * g.dx,
                          xc.z + dk[q] * s * g.dx};
            L.bval = theta_B(xb);
            any_cut = true;
          } else {
            L.nb = nb;
          }
        }
      }
  if (!any_cut) return th; // no interface in the box: constant extension

  // SOR; the cut operator stays an M-matrix, over-relaxation tuned by n
  const double omega = std::min(1.9, 2.0 / (1.0 + std::sin(M_PI / g.n)));
  double ref = 0.0;
  for (int c = 0; c < N; ++c) ref = std::max(ref, std::abs(th[c]));
  ref = std::max(ref, 1e-30);

  for (int iter = 0; iter < max_iter; ++iter) {
    double max_res = 0.0;
    for (int c = 0; c < N; ++c) {
      double diag = 0.0, rhs = 0.0;
      const Link* lc = &links[static_cast<std::size_t>(c) * ndir];
      for (int axis = 0; axis < ndir / 2; ++axis) {
        const Link& a = lc[2 * axis];
        const Link& b = lc[2 * axis + 1];
        const double ha = a.cut ? a.s : 1.0;
        const double hb = b.cut ? b.s : 1.0;
        const double pref = 2.0 / (ha + hb);
        // minus side
        if (a.cut) {
          diag += pref / ha;
          rhs += pref / ha * a.bval;
        } else if (a.nb >= 0) {
          diag += pref / ha;
          rhs += pref / ha * th[a.nb];
        } // wall mirror contributes nothing (zero flux)
        if (b.cut) {
          diag += pref / hb;
          rhs += pref / hb * b.bval;
        } else if (b.nb >= 0) {
          diag += pref / hb;
          rhs += pref / hb * th[b.nb];
        }
      }
      if (diag == 0.0) continue; // isolated cell (all walls)
      const double gs = rhs / diag;
      const double upd = th[c] + omega * (gs - th[c]);
      max_res = std::max(max_res, std::abs(upd - th[c]));
      th[c] = upd;
    }
    if (max_res <= tol * ref) return th;
  }
  throw NumericalError("harmonic_extension: SOR did not converge");
}

Stepper::Stepper(Grid grid, Eos eos, TransportParams tp, PenaltyParams pp,
                 GravityParams gp, StepConfig sc, VelocityFieldSpec vel, ShapeSpec shape,
                 BoundaryData bd, InitialProfile prof, double M0)
    : grid_(grid),
      eos_(std::move(eos)),
      tp_(tp),
      pp_(pp),
      gp_(gp),
      sc_(sc),
      vel_(std::move(vel)),
      shape_(shape),
      bd_(bd),
      M0_(M0),
      poisson_(grid, gp) {
  tp_.validate();
  pp_.validate();
  gp_.validate();
  sc_.validate();
  bd_.validate();
  if (sc_.dim != grid_.dim) throw ConfigError("stepping: dim disagrees with grid");

  phi0_ = initial_level_set(grid_, shape_);

  const int N = grid_.size();
  f_.rho.assign(N, 0.0);
  f_.momentum = VectorField(grid_);
  f_.Eint.assign(N, 0.0);
  f_.theta.assign(N, prof.theta0);
  f_.u = VectorField(grid_);
  f_.Psi.assign(N, 0.0);

  rebuild_geometry(0.0);

  // initial density, zeroed outside Omega_0
  std::vector<double> hydro_rho;
  if (prof.kind == ProfileKind::Hydrostatic1D) {
    // integrate d rho / dx = -rho A x / c_s^2 outward from the axis
    hydro_rho.assign(grid_.nx, prof.rho0);
    auto slope = [&](double x, double rho) {
      const double c2 = eos_.sound_speed_sq(rho, prof.theta0);
      return c2 > 0 ? -rho * prof.accel * x / c2 : 0.0;
    };
    const int mid = grid_.nx / 2;
    for (int dir : {+1, -1}) {
      double rho = prof.rho0;
      // start from the cell nearest the axis
      double x = grid_.cx(dir > 0 ? mid : mid - 1);
      rho += slope(0.5 * x, prof.rho0) * x; // midpoint from the axis to the first center
      hydro_rho[dir > 0 ? mid : mid - 1] = rho;
      for (int i = (dir > 0 ? mid + 1 : mid - 2); i >= 0 && i < grid_.nx; i += dir) {
        const double x0 = x, x1 = grid_.cx(i), h = x1 - x0;
        const double k1 = slope(x0, rho);
        const double k2 = slope(x0 + 0.5 * h, rho + 0.5 * h * k1);
        const double k3 = slope(x0 + 0.5 * h, rho + 0.5 * h * k2);
        const double k4 = slope(x1, rho + h * k3);
        rho += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        rho = std::max(rho, 0.0);
        hydro_rho[i] = rho;
        x = x1;
      }
    }
  }
  for (int k = 0; k < grid_.nz; ++k)
    for (int j = 0; j < grid_.ny; ++j)
      for (int i = 0; i < grid_.nx; ++i) {
        const int c = grid_.idx(i, j, k);
        if (geo_.phi[c] > 0.0) continue; // rho_0 = 0 in B \ Omega_0
        switch (prof.kind) {
          case ProfileKind::Uniform:
            f_.rho[c] = prof.rho0;
            break;
          case ProfileKind::GaussianBlob: {
            const Vec3 d = grid_.center(i, j, k) - prof.center;
            const double r2 = d.dot(d) / (prof.sigma * prof.sigma);
            f_.rho[c] = prof.pedestal + prof.peak * std::exp(-r2);
            break;
          }
          case ProfileKind::Hydrostatic1D:
            f_.rho[c] = hydro_rho[i];
            break;
        }
      }

  for (int c = 0; c < N; ++c) {
    const double a_eff = masks_.chi_xi[c] * eos_.params().a;
    f_.Eint[c] = eos_.energy_density_scaled(f_.rho[c], f_.theta[c], a_eff);
  }
  enforce_dirichlet();
  refresh_velocity(sc_.dt_max);
  gravity_substep();
}

double Stepper::sample_phi0(const Vec3& x) const {
  const Grid& g = grid_;
  auto clampi = [&](double s, int n) {
    double u = (s + g.half) / g.dx - 0.5;
    int i = static_cast<int>(std::floor(u));
    double f = u - i;
    if (i < 0) {
      i = 0;
      f = 0.0;
    }
    if (i > n - 2) {
      i = n - 2;
      f = 1.0;
    }
    return std::pair<int, double>(i, f);
  };
  auto [i, fx] = clampi(x.x, g.nx);
  auto [j, fy] = clampi(x.y, g.ny);
  if (g.dim == 2) {
    auto at = [&](int a, int b) { return phi0_[g.idx(a, b, 0)]; };
    return (at(i, j) * (1 - fx) + at(i + 1, j) * fx) * (1 - fy) +
           (at(i, j + 1) * (1 - fx) + at(i + 1, j + 1) * fx) * fy;
  }
  auto [k, fz] = clampi(x.z, g.nz);
  auto plane = [&](int kk) {
    auto at = [&](int a, int b) { return phi0_[g.idx(a, b, kk)]; };
    return (at(i, j) * (1 - fx) + at(i + 1, j) * fx) * (1 - fy) +
           (at(i, j + 1) * (1 - fx) + at(i + 1, j + 1) * fx) * fy;
  };
  return plane(k) * (1 - fz) + plane(k + 1) * fz;
}

void Stepper::rebuild_geometry(double t) {
  ScalarField phi =
      rebuild_level_set(grid_, vel_, t, [this](const Vec3& x) { return sample_phi0(x); },
                        sc_.dt_geom);
  geo_ = interface_geometry(grid_, phi, sc_.band_half_width_cells);
  if (geo_.volume < M0_) {
    std::ostringstream os;
    os << "volume floor violated: |Omega_t| = " << geo_.volume << " < M0 = " << M0_
       << " at t = " << t;
    throw InvariantViolation(os.str());
  }
  masks_ = build_masks(grid_, geo_.phi, pp_, sc_.mask_width_cells);
  f_.theta_tilde = harmonic_extension(
      grid_, geo_.phi, [&](const Vec3& x) { return bd_.theta_B(t, x); },
      f_.theta_tilde.empty() ? nullptr : &f_.theta_tilde);

  vmax_ = 0.0;
  for (int k = 0; k < grid_.nz; ++k)
    for (int j = 0; j < grid_.ny; ++j)
      for (int i = 0; i < grid_.nx; ++i)
        vmax_ = std::max(vmax_, eval_velocity(vel_, t, grid_.center(i, j, k)).norm());
  motion_since_rebuild_ = 0.0;
}

double Stepper::cell_ballistic(int c, const ScalarField& chi_xi,
                               const ScalarField& theta_tilde) const {
  const double a_eff = chi_xi[c] * eos_.params().a;
  const double rho = f_.rho[c];
  const double th = f_.theta[c];
  double v = 0.0;
  if (rho >= sc_.rho_vacuum_cut) {
    const Vec3 m = f_.momentum.at(c);
    v += 0.5 * m.dot(m) / rho;
  }
  v += eos_.energy_density_scaled(rho, th, a_eff);
  double s = (4.0 * a_eff / 3.0) * th * th * th;
  if (rho > 0.0) s += rho * eos_.molecular_entropy(rho / (th * std::sqrt(th)));
  v -= theta_tilde[c] * s;
  if (pp_.delta > 0.0 && rho > 0.0)
    v += pp_.delta / (pp_.beta - 1.0) * pow_positive(rho, pp_.beta);
  return v * grid_.cell_volume();
}

void Stepper::reabsorb_solid_matter(const ScalarField& chi_xi_at_sync,
                                    const ScalarField& theta_tilde_frozen,
                                    StepStats* stats) {
  // matter stranded by a sweeping interface moves to the least-phi neighbor;
  // the interface is impermeable, so this only sees freshly solid cells.
  // The gas/radiation energy split uses the chi_xi the cell energy was last
  // synchronized under, not the freshly rebuilt masks.  The exact ballistic
  // increment of each merge is recorded: it is the work the advancing wall
  // does on the gas a fixed Eulerian cell cannot express continuously.
  const Grid& g = grid_;
  for (int pass = 0; pass < 8; ++pass) {
    bool moved = false;
    for (int k = 0; k < g.nz; ++k)
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const int c = g.idx(i, j, k);
          if (geo_.phi[c] <= 0.0 || f_.rho[c] <= 0.0) continue;
          int best = -1;
          double best_phi = geo_.phi[c];
          auto consider = [&](int ii, int jj, int kk) {
            if (ii < 0 || jj < 0 || kk < 0 || ii >= g.nx || jj >= g.ny || kk >= g.nz) return;
            const int nb = g.idx(ii, jj, kk);
            if (geo_.phi[nb] < best_phi) {
              best_phi = geo_.phi[nb];
              best = nb;
            }
          };
          consider(i - 1, j, k);
          consider(i + 1, j, k);
          consider(i, j - 1, k);
          consider(i, j + 1, k);
          if (g.dim == 3) {
            consider(i, j, k - 1);
            consider(i, j, k + 1);
          }
          if (best < 0) continue;
          const double th = f_.theta[c];
          const double t2 = th * th;
          const double erad_old = chi_xi_at_sync[c] * eos_.params().a * t2 * t2;
          const double egas = std::max(f_.Eint[c] - erad_old, 0.0);
          if (stats) stats->swept_mass += f_.rho[c] * g.cell_volume();

          const double B_before = cell_ballistic(c, chi_xi_at_sync, theta_tilde_frozen) +
                                  cell_ballistic(best, chi_xi_at_sync, theta_tilde_frozen);
          f_.rho[best] += f_.rho[c];
          f_.rho[c] = 0.0;
          f_.momentum.x[best] += f_.momentum.x[c];
          f_.momentum.y[best] += f_.momentum.y[c];
          f_.momentum.z[best] += f_.momentum.z[c];
          f_.momentum.set(c, {0, 0, 0});
          f_.Eint[best] += egas;
          // the stranded cell keeps its temperature under the fresh mask
          f_.Eint[c] = masks_.chi_xi[c] * eos_.params().a * t2 * t2;
          // merged temperature from the pooled gas energy, so the ballistic
          // increment below sees the post-merge state
          if (f_.rho[best] >= sc_.rho_vacuum_cut) {
            try {
              f_.theta[best] = eos_.invert_internal_energy(
                  f_.rho[best], f_.Eint[best], masks_.chi_xi[best] * eos_.params().a);
            } catch (const std::exception&) {
              // keep the stale temperature; the energy step re-inverts anyway
            }
          }
          if (stats)
            stats->sweep_B_jump +=
                cell_ballistic(c, chi_xi_at_sync, theta_tilde_frozen) +
                cell_ballistic(best, chi_xi_at_sync, theta_tilde_frozen) - B_before;
          moved = true;
        }
    if (!moved) return;
  }
}

double Stepper::compute_dt() const {
  const Grid& g = grid_;
  double dt = sc_.dt_max;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double rho = f_.rho[c];
        const double th = f_.theta[c];
        // convective-acoustic limit everywhere
        double c2 = eos_.sound_speed_sq(rho, th);
        if (pp_.delta > 0.0 && rho > 0.0)
          c2 += pp_.delta * pp_.beta * pow_positive(rho, pp_.beta - 1.0);
        const double speed = f_.u.at(c).norm() + std::sqrt(std::max(c2, 0.0));
        if (speed > 0.0) dt = std::min(dt, sc_.cfl_conv * g.dx / speed);
        if (rho < sc_.rho_vacuum_cut) continue; // pointwise-implicit cells
        const TransportCoeffs tc = transport(th, tp_);
        if (rho >= sc_.rho_visc_implicit) {
          const double mu_w = masks_.f_omega[c] * tc.mu;
          if (mu_w > 0.0) dt = std::min(dt, sc_.cfl_visc * rho * g.dx * g.dx / mu_w);
        }
        const double kap = masks_.chi_nu[c] * tc.kappa;
        const double cap = eos_.energy_density_dtheta(rho, th, masks_.chi_xi[c] * eos_.params().a);
        if (kap > 0.0) dt = std::min(dt, sc_.cfl_cond * cap * g.dx * g.dx / kap);
      }
  if (!(dt > 1e-13))
    throw NumericalError("compute_dt: time step collapsed below 1e-13");
  return dt;
}

void Stepper::gravity_substep(StepStats* stats) {
  const int it = poisson_.solve(f_.rho, f_.Psi);
  if (stats) stats->poisson_iters = it;
}

void Stepper::continuity_substep(double dt) {
  const Grid& g = grid_;
  ScalarField rho_new = f_.rho;
  const double lam = dt / g.dx;
  auto face = [&](int cL, int cR, int axis) {
    if (geo_.fluid_indicator[cL] == 0.0 || geo_.fluid_indicator[cR] == 0.0)
      return; // impermeable interface: no mass crosses a solid face
    const double uf = 0.5 * ((axis == 0   ? f_.u.x[cL] + f_.u.x[cR]
                              : axis == 1 ? f_.u.y[cL] + f_.u.y[cR]
                                          : f_.u.z[cL] + f_.u.z[cR]));
    const double flux = uf >= 0.0 ? f_.rho[cL] * uf : f_.rho[cR] * uf;
    rho_new[cL] -= lam * flux;
    rho_new[cR] += lam * flux;
  };
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        if (i + 1 < g.nx) face(c, g.idx(i + 1, j, k), 0);
        if (j + 1 < g.ny) face(c, g.idx(i, j + 1, k), 1);
        if (g.dim == 3 && k + 1 < g.nz) face(c, g.idx(i, j, k + 1), 2);
      }
  for (int c = 0; c < g.size(); ++c)
    if (rho_new[c] < 0.0) throw StepRejected("continuity produced negative density");
  f_.rho = std::move(rho_new);
}

void Stepper::momentum_substep(double dt) {
  const Grid& g = grid_;
  const int N = g.size();
  const double lam = dt / g.dx;

  // cell pressure and mollified viscosities
  ScalarField p(N), mu_w(N), eta_w(N);
  for (int c = 0; c < N; ++c) {
    p[c] = penalized_pressure(eos_, f_.rho[c], f_.theta[c], masks_.chi_xi[c], pp_);
    const TransportCoeffs tc = transport(f_.theta[c], tp_);
    mu_w[c] = masks_.f_omega[c] * tc.mu;
    eta_w[c] = masks_.f_omega[c] * tc.eta;
  }
  const VectorField gradPsi = potential_gradient(g, f_.Psi);

  std::vector<VelGrad> cell_grad(N);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        cell_grad[g.idx(i, j, k)] = velocity_gradient(g, f_.u, i, j, k);

  // heavy cells take the conservative explicit viscous flux; light cells a
  // pointwise-implicit one (their inertia cannot carry the explicit limit)
  std::vector<char> heavy(N);
  for (int c = 0; c < N; ++c) heavy[c] = f_.rho[c] >= sc_.rho_visc_implicit;

  VectorField m_new = f_.momentum;

  // upwind convection of rho u (masked like the mass flux) and viscous
  // traction on interior faces
  auto conv_face = [&](int cL, int cR, int axis) {
    if (geo_.fluid_indicator[cL] == 0.0 || geo_.fluid_indicator[cR] == 0.0) return;
    const double uf = 0.5 * ((axis == 0   ? f_.u.x[cL] + f_.u.x[cR]
                              : axis == 1 ? f_.u.y[cL] + f_.u.y[cR]
                                          : f_.u.z[cL] + f_.u.z[cR]));
    const int don = uf >= 0.0 ? cL : cR;
    const double fx = f_.momentum.x[don] * uf;
    const double fy = f_.momentum.y[don] * uf;
    const double fz = f_.momentum.z[don] * uf;
    m_new.x[cL] -= lam * fx;
    m_new.x[cR] += lam * fx;
    m_new.y[cL] -= lam * fy;
    m_new.y[cR] += lam * fy;
    m_new.z[cL] -= lam * fz;
    m_new.z[cR] += lam * fz;
  };

  auto visc_face = [&](int iL, int jL, int kL, int axis) {
    const int cL = g.idx(iL, jL, kL);
    const int iR = iL + (axis == 0), jR = jL + (axis == 1), kR = kL + (axis == 2);
    const int cR = g.idx(iR, jR, kR);
    // face velocity gradient: compact across the face, averaged tangentially
    const VelGrad& gl = cell_grad[cL];
    const VelGrad& gr = cell_grad[cR];
    VelGrad gf;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) gf.g[a][b] = 0.5 * (gl.g[a][b] + gr.g[a][b]);
    const double* ul[3] = {f_.u.x.data(), f_.u.y.data(), f_.u.z.data()};
    for (int a = 0; a < 3; ++a) gf.g[a][axis] = (ul[a][cR] - ul[a][cL]) / g.dx;
    gf.div = gf.g[0][0] + gf.g[1][1] + gf.g[2][2];
    const double mu = 0.5 * (mu_w[cL] + mu_w[cR]);
    const double eta = 0.5 * (eta_w[cL] + eta_w[cR]);
    // traction (S . e_axis)
    double trac[3];
    for (int a = 0; a < 3; ++a) {
      double s = mu * (gf.g[a][axis] + gf.g[axis][a]);
      if (a == axis) s += -mu * (2.0 / 3.0) * gf.div + eta * gf.div;
      trac[a] = s;
    }
    if (heavy[cL]) {
      m_new.x[cL] += lam * trac[0];
      m_new.y[cL] += lam * trac[1];
      m_new.z[cL] += lam * trac[2];
    }
    if (heavy[cR]) {
      m_new.x[cR] -= lam * trac[0];
      m_new.y[cR] -= lam * trac[1];
      m_new.z[cR] -= lam * trac[2];
    }
  };

  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        if (i + 1 < g.nx) {
          conv_face(c, g.idx(i + 1, j, k), 0);
          visc_face(i, j, k, 0);
        }
        if (j + 1 < g.ny) {
          conv_face(c, g.idx(i, j + 1, k), 1);
          visc_face(i, j, k, 1);
        }
        if (g.dim == 3 && k + 1 < g.nz) {
          conv_face(c, g.idx(i, j, k + 1), 2);
          visc_face(i, j, k, 2);
        }
      }

  // pressure gradient, gravity, and the implicit interface penalty
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double rho = f_.rho[c];
        if (rho < sc_.rho_vacuum_cut) continue; // no resolvable matter to push
        auto pd = [&](int cm, int cp, bool em, bool ep) {
          return (p[cp] - p[cm]) / ((em || ep) ? g.dx : 2.0 * g.dx);
        };
        const double dpx = pd(g.idx(std::max(i - 1, 0), j, k),
                              g.idx(std::min(i + 1, g.nx - 1), j, k), i == 0, i == g.nx - 1);
        const double dpy = pd(g.idx(i, std::max(j - 1, 0), k),
                              g.idx(i, std::min(j + 1, g.ny - 1), k), j == 0, j == g.ny - 1);
        m_new.x[c] += dt * (-dpx + rho * gradPsi.x[c]);
        m_new.y[c] += dt * (-dpy + rho * gradPsi.y[c]);
        if (g.dim == 3) {
          const double dpz = pd(g.idx(i, j, std::max(k - 1, 0)),
                                g.idx(i, j, std::min(k + 1, g.nz - 1)), k == 0, k == g.nz - 1);
          m_new.z[c] += dt * (-dpz + rho * gradPsi.z[c]);
        }

        const double dw = geo_.delta_weight[c];
        if (dw > 0.0) {
          // backward-Euler normal-direction relaxation toward V.n; exact in
          // the eps -> 0 limit, no time-step restriction
          const Vec3 n = geo_.normal.at(c);
          const Vec3 V = eval_velocity(vel_, t_, g.center(i, j, k));
          const double chi = dt * dw / pp_.eps;
          const double mn = m_new.at(c).dot(n);
          const double mn_new = (mn + chi * V.dot(n)) / (1.0 + chi / rho);
          const Vec3 corr = n * (mn_new - mn);
          m_new.set(c, m_new.at(c) + corr);
        }
      }

  // pointwise-implicit viscosity for light matter cells, as a per-component
  // Laplacian with lagged neighbors
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double rho = f_.rho[c];
        if (heavy[c] || rho < sc_.rho_vacuum_cut) continue;
        double diag = 0.0;
        Vec3 nb_sum{};
        auto face_nb = [&](int ii, int jj, int kk) {
          if (ii < 0 || jj < 0 || kk < 0 || ii >= g.nx || jj >= g.ny || kk >= g.nz) return;
          const int nb = g.idx(ii, jj, kk);
          const double muf = 0.5 * (2.0 * mu_w[c] + eta_w[c] + 2.0 * mu_w[nb] + eta_w[nb]);
          diag += muf;
          nb_sum = nb_sum + f_.u.at(nb) * muf;
        };
        face_nb(i - 1, j, k);
        face_nb(i + 1, j, k);
        face_nb(i, j - 1, k);
        face_nb(i, j + 1, k);
        if (g.dim == 3) {
          face_nb(i, j, k - 1);
          face_nb(i, j, k + 1);
        }
        const double zeta = dt / (rho * g.dx * g.dx);
        const Vec3 ustar = m_new.at(c) * (1.0 / rho);
        const Vec3 unew = (ustar + nb_sum * zeta) * (1.0 / (1.0 + zeta * diag));
        m_new.set(c, unew * rho);
      }

  // outer wall: u = 0
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (g.on_wall(i, j, k)) m_new.set(g.idx(i, j, k), {0, 0, 0});

  f_.momentum = std::move(m_new);
}

void Stepper::refresh_velocity(double dt) {
  const Grid& g = grid_;
  const int N = g.size();
  std::vector<char> matter(N);
  for (int c = 0; c < N; ++c) {
    matter[c] = f_.rho[c] >= sc_.rho_vacuum_cut;
    if (matter[c]) {
      const double inv = 1.0 / f_.rho[c];
      f_.u.x[c] = f_.momentum.x[c] * inv;
      f_.u.y[c] = f_.momentum.y[c] * inv;
      f_.u.z[c] = f_.momentum.z[c] * inv;
    }
  }
  // smooth extension into matter-free cells: Gauss-Seidel sweeps of the
  // Laplace equation with matter cells as data and u = 0 on the wall
  for (int sweep = 0; sweep < sc_.extension_sweeps; ++sweep) {
    for (int k = 0; k < g.nz; ++k)
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const int c = g.idx(i, j, k);
          if (matter[c]) continue;
          if (g.on_wall(i, j, k)) {
            f_.u.set(c, {0, 0, 0});
            continue;
          }
          double sx = 0, sy = 0, sz = 0;
          int cnt = 0;
          auto add = [&](int nb) {
            sx += f_.u.x[nb];
            sy += f_.u.y[nb];
            sz += f_.u.z[nb];
            ++cnt;
          };
          add(g.idx(i - 1, j, k));
          add(g.idx(i + 1, j, k));
          add(g.idx(i, j - 1, k));
          add(g.idx(i, j + 1, k));
          if (g.dim == 3) {
            add(g.idx(i, j, k - 1));
            add(g.idx(i, j, k + 1));
          }
          f_.u.x[c] = sx / cnt;
          f_.u.y[c] = sy / cnt;
          f_.u.z[c] = sz / cnt;
        }
  }
  // massless cells on the interface band obey the quasi-static penalty
  // balance: the normal velocity relaxes onto V.n with the same implicit
  // factor evaluated at the vacuum density scale
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        if (matter[c]) continue;
        const double dw = geo_.delta_weight[c];
        if (dw <= 0.0) continue;
        const Vec3 n = geo_.normal.at(c);
        const Vec3 V = eval_velocity(vel_, t_, g.center(i, j, k));
        const double rho_c = std::max(f_.rho[c], sc_.rho_floor);
        const double relax = (dt * dw / pp_.eps) / rho_c;
        const double un = f_.u.at(c).dot(n);
        const double un_new = (un + relax * V.dot(n)) / (1.0 + relax);
        f_.u.set(c, f_.u.at(c) + n * (un_new - un));
      }
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        if (g.on_wall(i, j, k)) f_.u.set(c, {0, 0, 0});
        // keep m = rho u consistent on matter-free cells
        if (!matter[c]) f_.momentum.set(c, f_.u.at(c) * f_.rho[c]);
      }
}

void Stepper::energy_substep(double dt, StepStats* stats) {
  const Grid& g = grid_;
  const int N = g.size();
  const double lam = dt / g.dx;
  const double a = eos_.params().a;

  ScalarField kap(N), p(N);
  std::vector<char> matter(N), pinned(N);
  const double dir_band = sc_.dirichlet_band_cells * g.dx;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        kap[c] = masks_.chi_nu[c] * transport(f_.theta[c], tp_).kappa;
        p[c] = penalized_pressure(eos_, f_.rho[c], f_.theta[c], masks_.chi_xi[c], pp_);
        matter[c] = f_.rho[c] >= sc_.rho_vacuum_cut;
        // Dirichlet data carriers: enforce_dirichlet overwrites them at the
        // end of the step, so they enter the updates as frozen reservoirs
        pinned[c] = std::abs(geo_.phi[c]) <= dir_band || g.on_wall(i, j, k);
      }

  // per-cell work and dissipation, shared by the matter and vacuum updates
  ScalarField work(N);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const VelGrad vg = velocity_gradient(g, f_.u, i, j, k);
        const TransportCoeffs tc = transport(f_.theta[c], tp_);
        const double diss = stress_dissipation(masks_.f_omega[c] * tc.mu,
                                               masks_.f_omega[c] * tc.eta, vg);
        work[c] = -p[c] * vg.div + diss;
      }

  ScalarField E_new = f_.Eint;

  auto face = [&](int cL, int cR, int axis) {
    // convection, masked at the impermeable interface
    if (geo_.fluid_indicator[cL] != 0.0 && geo_.fluid_indicator[cR] != 0.0) {
      const double uf = 0.5 * ((axis == 0   ? f_.u.x[cL] + f_.u.x[cR]
                                : axis == 1 ? f_.u.y[cL] + f_.u.y[cR]
                                            : f_.u.z[cL] + f_.u.z[cR]));
      const double flux = uf >= 0.0 ? f_.Eint[cL] * uf : f_.Eint[cR] * uf;
      E_new[cL] -= lam * flux;
      E_new[cR] += lam * flux;
    }
    // conduction with harmonic-mean face conductivity (kappa_nu jumps at the
    // interface); faces touching matter-free cells are handled by the vacuum
    // solve below
    if (matter[cL] && matter[cR]) {
      const double kf = harmonic_mean(kap[cL], kap[cR]);
      if (kf > 0.0) {
        const double dfl = kf * (f_.theta[cR] - f_.theta[cL]) / g.dx;
        E_new[cL] += lam * dfl;
        E_new[cR] -= lam * dfl;
      }
    }
  };
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        if (i + 1 < g.nx) face(c, g.idx(i + 1, j, k), 0);
        if (j + 1 < g.ny) face(c, g.idx(i, j + 1, k), 1);
        if (g.dim == 3 && k + 1 < g.nz) face(c, g.idx(i, j, k + 1), 2);
      }

  // matter-free cells: conduction, sink and work solved together by
  // backward Euler with Gauss-Seidel sweeps over the vacuum subregion
  // (matter temperatures frozen); their heat capacity vanishes with theta,
  // so no explicit treatment is stable. The sweeps run until the iterate
  // settles, and the matter side of each boundary face then receives the
  // antisymmetric flux, so the exchange stays conservative up to the solve
  // residual.
  std::vector<char> vacuum_done(N, 0);
  {
    std::vector<int> vac;
    for (int c = 0; c < N; ++c)
      if (!matter[c] && !pinned[c]) vac.push_back(c);
    if (!vac.empty()) {
      ScalarField theta_star = f_.theta;
      const double inv_dx2 = 1.0 / (g.dx * g.dx);
      const int nx = g.nx, nxy = g.nx * g.ny;
      auto for_each_neighbor = [&](int c, auto&& fn) {
        const int k = c / nxy, j = (c / nx) % g.ny, i = c % nx;
        if (i > 0) fn(c - 1);
        if (i + 1 < g.nx) fn(c + 1);
        if (j > 0) fn(c - nx);
        if (j + 1 < g.ny) fn(c + nx);
        if (g.dim == 3) {
          if (k > 0) fn(c - nxy);
          if (k + 1 < g.nz) fn(c + nxy);
        }
      };
      for (int sweep = 0; sweep < sc_.vacuum_sweeps; ++sweep) {
        double delta = 0.0;
        for (int c : vac) {
          double diag = 0.0, rhs_nb = 0.0;
          for_each_neighbor(c, [&](int nb) {
            const double kf = harmonic_mean(kap[c], kap[nb]);
            diag += kf * inv_dx2;
            rhs_nb += kf * inv_dx2 * theta_star[nb];
          });
          const double a_eff = masks_.chi_xi[c] * eos_.params().a;
          const double rhs = E_new[c] + dt * (work[c] + rhs_nb);
          const double next = solve_vacuum_theta(rhs, a_eff, diag, dt, theta_star[c]);
          delta = std::max(delta, std::abs(next - theta_star[c]));
          theta_star[c] = next;
        }
        if (delta <= 1e-10) break;
      }
      // boundary faces: the matter side loses what the vacuum side absorbed
      // (pinned cells are reservoirs and take no counter-flux)
      for (int c : vac) {
        for_each_neighbor(c, [&](int nb) {
          if (!matter[nb] || pinned[nb]) return;
          const double kf = harmonic_mean(kap[c], kap[nb]);
          E_new[nb] -= dt * kf * (f_.theta[nb] - theta_star[c]) * inv_dx2;
        });
        const double a_eff = masks_.chi_xi[c] * eos_.params().a;
        f_.theta[c] = theta_star[c];
        E_new[c] = eos_.energy_density_scaled(f_.rho[c], theta_star[c], a_eff);
        vacuum_done[c] = 1;
      }
    }
  }

  int warnings = 0;
  for (int c = 0; c < N; ++c) {
    if (vacuum_done[c]) continue;
    if (pinned[c] && !matter[c]) continue; // overwritten by the Dirichlet data
    const double a_eff = masks_.chi_xi[c] * a;
    const double sink = pp_.lambda * pow_positive(f_.theta[c], pp_.alpha + 1.0);
    E_new[c] += dt * (work[c] - sink);
    double th;
    try {
      th = eos_.invert_internal_energy(f_.rho[c], E_new[c], a_eff);
    } catch (const std::exception&) {
      th = sc_.theta_floor;
      ++warnings;
    }
    f_.theta[c] = th;
    E_new[c] = eos_.energy_density_scaled(f_.rho[c], th, a_eff);
  }
  f_.Eint = std::move(E_new);
  enforce_dirichlet();
  if (stats) stats->inversion_warnings += warnings;
  inversion_warnings_ += warnings;
}

void Stepper::enforce_dirichlet() {
  const Grid& g = grid_;
  const double band = sc_.dirichlet_band_cells * g.dx;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        double th = f_.theta[c];
        bool pin = false;
        if (std::abs(geo_.phi[c]) <= band) {
          th = bd_.theta_B(t_, g.center(i, j, k));
          pin = true;
        } else if (g.on_wall(i, j, k)) {
          th = f_.theta_tilde[c];
          pin = true;
        }
        if (!pin) continue;
        f_.theta[c] = th;
        f_.Eint[c] =
            eos_.energy_density_scaled(f_.rho[c], th, masks_.chi_xi[c] * eos_.params().a);
      }
}

double Stepper::solve_vacuum_theta(double rhs, double a_eff, double cond_diag, double dt,
                                   double guess) const {
  // a_eff th^4 + dt lambda th^{alpha+1} + dt cond_diag th = rhs, monotone
  if (!(rhs > 0.0)) return sc_.theta_floor;
  auto gfun = [&](double th) {
    const double t2 = th * th;
    return a_eff * t2 * t2 + dt * pp_.lambda * pow_positive(th, pp_.alpha + 1.0) +
           dt * cond_diag * th - rhs;
  };
  auto dfun = [&](double th) {
    return 4.0 * a_eff * th * th * th +
           dt * pp_.lambda * (pp_.alpha + 1.0) * pow_positive(th, pp_.alpha) +
           dt * cond_diag;
  };

  // plain Newton from the warm start; monotone g means any sign change brackets
  double th = std::max(guess, sc_.theta_floor);
  for (int it = 0; it < 30; ++it) {
    const double r = gfun(th);
    if (std::abs(r) <= 1e-13 * rhs) return std::max(th, sc_.theta_floor);
    const double d = dfun(th);
    const double next = th - r / d;
    if (!(next > 0.0) || !std::isfinite(next)) break;
    th = next;
  }

  // safeguarded fallback
  double lo = sc_.theta_floor, hi = std::max(1.0, th);
  if (gfun(lo) >= 0.0) return sc_.theta_floor;
  while (gfun(hi) < 0.0) {
    hi *= 4.0;
    if (hi > 1e30) throw NumericalError("vacuum theta solve: unbounded");
  }
  th = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double r = gfun(th);
    if (std::abs(r) <= 1e-13 * std::max(rhs, 1e-300)) break;
    if (r > 0.0)
      hi = th;
    else
      lo = th;
    double next = th - r / dfun(th);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    th = next;
  }
  return std::max(th, sc_.theta_floor);
}

void Stepper::check_state(const char* where) const {
  for (int c = 0; c < grid_.size(); ++c) {
    if (!std::isfinite(f_.rho[c]) || !std::isfinite(f_.Eint[c]) ||
        !std::isfinite(f_.theta[c]) || !std::isfinite(f_.momentum.x[c]) ||
        !std::isfinite(f_.momentum.y[c]) || !std::isfinite(f_.momentum.z[c])) {
      std::ostringstream os;
      os << "non-finite field value after " << where << " at cell " << c
         << " (rho=" << f_.rho[c] << ", E=" << f_.Eint[c] << ", theta=" << f_.theta[c]
         << ")";
      throw InvariantViolation(os.str());
    }
    if (f_.rho[c] < 0.0) throw InvariantViolation("negative density escaped the update");
    if (!(f_.theta[c] > 0.0)) throw InvariantViolation("non-positive temperature");
  }
}

double Stepper::total_mass() const {
  return kahan_sum(f_.rho) * grid_.cell_volume();
}

StepStats Stepper::advance() {
  StepStats st;
  st.t = t_;
  double dt = compute_dt();

  for (int attempt = 0;; ++attempt) {
    FieldSet backup = f_;
    DomainGeometry geo_backup = geo_;
    MaskFields masks_backup = masks_;
    const double motion_backup = motion_since_rebuild_;
    try {
      motion_since_rebuild_ += vmax_ * dt;
      st.geometry_rebuilt = false;
      if (motion_since_rebuild_ >= sc_.geometry_rebuild_fraction * grid_.dx) {
        const ScalarField chi_at_sync = masks_.chi_xi;
        const ScalarField theta_tilde_frozen = f_.theta_tilde;
        rebuild_geometry(t_ + dt);
        reabsorb_solid_matter(chi_at_sync, theta_tilde_frozen, &st);
        st.geometry_rebuilt = true;
      }
      gravity_substep(&st);
      continuity_substep(dt);
      momentum_substep(dt);
      // energy sources and dissipation are evaluated on the pre-step velocity,
      // matching the diagnostics snapshot; u is re-derived afterwards
      energy_substep(dt, &st);
      refresh_velocity(dt);
      check_state("step");
      t_ += dt;
      st.dt = dt;
      return st;
    } catch (const StepRejected& rej) {
      f_ = std::move(backup);
      geo_ = std::move(geo_backup);
      masks_ = std::move(masks_backup);
      motion_since_rebuild_ = motion_backup;
      dt *= 0.5;
      if (attempt >= sc_.max_dt_retries)
        throw NumericalError("step rejected " + std::to_string(attempt + 1) +
                             " times: " + rej.what());
    }
  }
}

}  // namespace nsfp
