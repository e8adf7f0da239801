#include "nsfp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

namespace nsfp {

namespace {

// smooth radial cutoff: 1 inside R - w, 0 beyond R
double radial_cutoff(double r, double R, double w) {
  if (r >= R) return 0.0;
  if (r <= R - w) return 1.0;
  return 0.5 * (1.0 + std::cos(M_PI * (r - (R - w)) / w));
}

Vec3 bilinear_sample(const VelocityFieldSpec& spec, const Vec3& x) {
  // cell-centered table over [-tab_half, tab_half]^dim, clamped at the edges
  const int n = spec.tab_n;
  const double dx = 2.0 * spec.tab_half / n;
  auto clamp_idx = [&](double s) {
    double u = (s + spec.tab_half) / dx - 0.5;
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
  auto [i, fx] = clamp_idx(x.x);
  auto [j, fy] = clamp_idx(x.y);
  if (spec.tab_dim == 2) {
    auto at = [&](int a, int b) { return spec.table[a + n * b]; };
    Vec3 v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
    return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
  }
  auto [k, fz] = clamp_idx(x.z);
  auto at = [&](int a, int b, int c) { return spec.table[a + n * (b + n * c)]; };
  auto plane = [&](int c) {
    Vec3 v00 = at(i, j, c), v10 = at(i + 1, j, c), v01 = at(i, j + 1, c),
         v11 = at(i + 1, j + 1, c);
    return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
  };
  return plane(k) * (1 - fz) + plane(k + 1) * fz;
}

}  // namespace

VelocityFieldSpec load_tabulated_velocity(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("velocity table: cannot open " + path);
  VelocityFieldSpec spec;
  spec.kind = VelocityKind::UserTabulated;
  spec.table_path = path;
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  if (!(hs >> spec.tab_dim >> spec.tab_n >> spec.tab_half))
    throw ConfigError("velocity table: bad header (want: dim n half_width)");
  if (spec.tab_dim != 2 && spec.tab_dim != 3)
    throw ConfigError("velocity table: dim must be 2 or 3");
  const long total = spec.tab_dim == 2 ? long(spec.tab_n) * spec.tab_n
                                       : long(spec.tab_n) * spec.tab_n * spec.tab_n;
  spec.table.resize(total);
  for (long c = 0; c < total; ++c) {
    Vec3 v;
    if (!(in >> v.x >> v.y)) throw ConfigError("velocity table: truncated body");
    if (spec.tab_dim == 3 && !(in >> v.z))
      throw ConfigError("velocity table: truncated body");
    spec.table[c] = v;
  }
  spec.support_radius = spec.tab_half;
  return spec;
}

Vec3 eval_velocity(const VelocityFieldSpec& spec, double t, const Vec3& x) {
  switch (spec.kind) {
    case VelocityKind::Static:
      return {};
    case VelocityKind::RigidRotation: {
      const double r = x.norm();
      const double c = radial_cutoff(r, spec.support_radius, spec.cutoff_width);
      // tangential field, stays divergence-free under a radial cutoff
      return {-spec.rate * c * x.y, spec.rate * c * x.x, 0.0};
    }
    case VelocityKind::Pulsation: {
      const double r = x.norm();
      const double c = radial_cutoff(r, spec.support_radius, spec.cutoff_width);
      const double s = spec.amplitude * std::sin(2.0 * M_PI * spec.frequency * t);
      return x * (s * c);
    }
    case VelocityKind::UserTabulated: {
      const double r = x.norm();
      if (r >= spec.support_radius) return {};
      return bilinear_sample(spec, x);
    }
  }
  return {};
}

double eval_divergence(const VelocityFieldSpec& spec, double t, const Vec3& x,
                       double fd_step) {
  const double h = fd_step;
  double div = 0.0;
  div += (eval_velocity(spec, t, {x.x + h, x.y, x.z}).x -
          eval_velocity(spec, t, {x.x - h, x.y, x.z}).x);
  div += (eval_velocity(spec, t, {x.x, x.y + h, x.z}).y -
          eval_velocity(spec, t, {x.x, x.y - h, x.z}).y);
  div += (eval_velocity(spec, t, {x.x, x.y, x.z + h}).z -
          eval_velocity(spec, t, {x.x, x.y, x.z - h}).z);
  return div / (2.0 * h);
}

Vec3 advance_flow_map(const VelocityFieldSpec& spec, double t0, double t1,
                      const Vec3& seed, double dt_geom) {
  if (t1 == t0) return seed;
  const double span = t1 - t0; // may be negative for backward trajectories
  const int nstep = std::max(1, static_cast<int>(std::ceil(std::abs(span) / dt_geom)));
  const double h = span / nstep;
  Vec3 x = seed;
  double t = t0;
  for (int s = 0; s < nstep; ++s) {
    Vec3 k1 = eval_velocity(spec, t, x);
    Vec3 k2 = eval_velocity(spec, t + 0.5 * h, x + k1 * (0.5 * h));
    Vec3 k3 = eval_velocity(spec, t + 0.5 * h, x + k2 * (0.5 * h));
    Vec3 k4 = eval_velocity(spec, t + h, x + k3 * h);
    x = x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
    t += h;
  }
  return x;
}

std::vector<Vec3> advance_flow_map(const VelocityFieldSpec& spec, double t0, double t1,
                                   const std::vector<Vec3>& seeds, double dt_geom) {
  std::vector<Vec3> out(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i)
    out[i] = advance_flow_map(spec, t0, t1, seeds[i], dt_geom);
  return out;
}

ScalarField initial_level_set(const Grid& g, const ShapeSpec& shape) {
  ScalarField phi = g.make_scalar();
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const Vec3 x = g.center(i, j, k) - shape.center;
        double v = 0.0;
        switch (shape.kind) {
          case ShapeKind::Circle:
            v = x.norm() - shape.r;
            break;
          case ShapeKind::Ellipse: {
            // scaled implicit value; a good distance proxy after reinit
            double q = x.x * x.x / (shape.rx * shape.rx) + x.y * x.y / (shape.ry * shape.ry);
            if (g.dim == 3) q += x.z * x.z / (shape.rz * shape.rz);
            const double rmin = g.dim == 3 ? std::min({shape.rx, shape.ry, shape.rz})
                                           : std::min(shape.rx, shape.ry);
            v = (std::sqrt(q) - 1.0) * rmin;
            break;
          }
          case ShapeKind::HalfSpace: {
            Vec3 n = shape.normal;
            const double nn = n.norm();
            v = x.dot(n) / (nn > 0 ? nn : 1.0);
            break;
          }
          case ShapeKind::Box: {
            const double dxs = std::abs(x.x) - shape.extent.x;
            const double dys = std::abs(x.y) - shape.extent.y;
            double v2 = std::max(dxs, dys);
            if (g.dim == 3) v2 = std::max(v2, std::abs(x.z) - shape.extent.z);
            v = v2;
            break;
          }
        }
        phi[g.idx(i, j, k)] = v;
      }
  reinitialize(g, phi);
  return phi;
}

ScalarField rebuild_level_set(const Grid& g, const VelocityFieldSpec& spec, double t,
                              const std::function<double(const Vec3&)>& phi0,
                              double dt_geom) {
  ScalarField phi = g.make_scalar();
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        Vec3 y = advance_flow_map(spec, t, 0.0, g.center(i, j, k), dt_geom);
        // V vanishes near the box wall, so an exiting trajectory is benign
        y.x = std::clamp(y.x, -g.half, g.half);
        y.y = std::clamp(y.y, -g.half, g.half);
        if (g.dim == 3) y.z = std::clamp(y.z, -g.half, g.half);
        phi[g.idx(i, j, k)] = phi0(y);
      }
  if (t != 0.0) reinitialize(g, phi);
  return phi;
}

namespace {

struct FmmEntry {
  double dist;
  int cell;
  bool operator>(const FmmEntry& o) const { return dist > o.dist; }
};

// first-order Eikonal update from accepted neighbors
double eikonal_update(const Grid& g, const std::vector<double>& d,
                      const std::vector<char>& accepted, int i, int j, int k) {
  double a[3];
  int m = 0;
  auto axis_min = [&](int di, int dj, int dk) {
    double best = std::numeric_limits<double>::infinity();
    int i0 = i - di, j0 = j - dj, k0 = k - dk;
    int i1 = i + di, j1 = j + dj, k1 = k + dk;
    if (i0 >= 0 && j0 >= 0 && k0 >= 0 && i0 < g.nx && j0 < g.ny && k0 < g.nz) {
      int c = g.idx(i0, j0, k0);
      if (accepted[c]) best = std::min(best, d[c]);
    }
    if (i1 < g.nx && j1 < g.ny && k1 < g.nz && i1 >= 0 && j1 >= 0 && k1 >= 0) {
      int c = g.idx(i1, j1, k1);
      if (accepted[c]) best = std::min(best, d[c]);
    }
    return best;
  };
  double vx = axis_min(1, 0, 0), vy = axis_min(0, 1, 0);
  if (std::isfinite(vx)) a[m++] = vx;
  if (std::isfinite(vy)) a[m++] = vy;
  if (g.dim == 3) {
    double vz = axis_min(0, 0, 1);
    if (std::isfinite(vz)) a[m++] = vz;
  }
  if (m == 0) return std::numeric_limits<double>::infinity();
  std::sort(a, a + m);
  // solve sum (d - a_i)^2 = dx^2 over the usable subset
  double sol = a[0] + g.dx;
  for (int use = 2; use <= m; ++use) {
    if (sol <= a[use - 1]) break;
    double s = 0, s2 = 0;
    for (int q = 0; q < use; ++q) {
      s += a[q];
      s2 += a[q] * a[q];
    }
    const double A = use, B = -2.0 * s, C = s2 - g.dx * g.dx;
    const double disc = B * B - 4 * A * C;
    if (disc >= 0) {
      const double cand = (-B + std::sqrt(disc)) / (2 * A);
      if (cand >= a[use - 1]) sol = cand;
    }
  }
  return sol;
}

}  // namespace

void reinitialize(const Grid& g, ScalarField& phi) {
  const int N = g.size();
  std::vector<double> dist(N, std::numeric_limits<double>::infinity());
  std::vector<char> accepted(N, 0);
  std::priority_queue<FmmEntry, std::vector<FmmEntry>, std::greater<FmmEntry>> heap;

  // seed: cells adjacent to the zero contour get a local distance estimate
  // from the per-axis line crossings, combined as 1/d^2 = sum 1/d_m^2
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double pc = phi[c];
        if (pc == 0.0) {
          dist[c] = 0.0;
          continue;
        }
        double inv2 = 0.0;
        auto axis = [&](int cm, int cp) {
          double best = std::numeric_limits<double>::infinity();
          for (int cn : {cm, cp}) {
            if (cn < 0) continue;
            const double pn = phi[cn];
            if ((pc > 0.0) != (pn > 0.0))
              best = std::min(best, std::abs(pc / (pc - pn)) * g.dx);
          }
          if (std::isfinite(best)) inv2 += 1.0 / (best * best);
        };
        axis(i > 0 ? g.idx(i - 1, j, k) : -1, i + 1 < g.nx ? g.idx(i + 1, j, k) : -1);
        axis(j > 0 ? g.idx(i, j - 1, k) : -1, j + 1 < g.ny ? g.idx(i, j + 1, k) : -1);
        if (g.dim == 3)
          axis(k > 0 ? g.idx(i, j, k - 1) : -1, k + 1 < g.nz ? g.idx(i, j, k + 1) : -1);
        if (inv2 > 0.0) dist[c] = 1.0 / std::sqrt(inv2);
      }
  for (int c = 0; c < N; ++c)
    if (std::isfinite(dist[c])) {
      accepted[c] = 1;
      heap.push({dist[c], c});
    }
  if (heap.empty()) return; // no interface in the box; keep phi as-is

  // fast marching
  while (!heap.empty()) {
    FmmEntry e = heap.top();
    heap.pop();
    if (e.dist > dist[e.cell] + 1e-300) continue;
    const int k = e.cell / (g.nx * g.ny);
    const int j = (e.cell / g.nx) % g.ny;
    const int i = e.cell % g.nx;
    const int di[6] = {1, -1, 0, 0, 0, 0};
    const int dj[6] = {0, 0, 1, -1, 0, 0};
    const int dk[6] = {0, 0, 0, 0, 1, -1};
    const int nn = g.dim == 3 ? 6 : 4;
    for (int q = 0; q < nn; ++q) {
      const int ii = i + di[q], jj = j + dj[q], kk = k + dk[q];
      if (ii < 0 || jj < 0 || kk < 0 || ii >= g.nx || jj >= g.ny || kk >= g.nz) continue;
      const int c = g.idx(ii, jj, kk);
      const double cand = eikonal_update(g, dist, accepted, ii, jj, kk);
      if (cand < dist[c]) {
        dist[c] = cand;
        accepted[c] = 1;
        heap.push({cand, c});
      }
    }
  }
  for (int c = 0; c < N; ++c) phi[c] = (phi[c] < 0.0 ? -1.0 : 1.0) * dist[c];
}

DomainGeometry interface_geometry(const Grid& g, const ScalarField& phi,
                                  double band_half_width_cells) {
  DomainGeometry geo;
  geo.phi = phi;
  geo.normal = VectorField(g);
  geo.delta_weight = g.make_scalar();
  geo.fluid_indicator = g.make_scalar();
  geo.band_half_width = band_half_width_cells * g.dx;
  const double w = geo.band_half_width;

  double vol = 0.0;
  const double dV = g.cell_volume();
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double p = phi[c];
        geo.fluid_indicator[c] = p <= 0.0 ? 1.0 : 0.0;

        // smoothed Heaviside of -phi for a sub-cell volume estimate
        if (p <= -w)
          vol += dV;
        else if (p < w)
          vol += dV * 0.5 * (1.0 - p / w - std::sin(M_PI * p / w) / M_PI);

        if (std::abs(p) < w) {
          auto diff = [&](int a0, int a1) { return (phi[a1] - phi[a0]) / (2.0 * g.dx); };
          const int im = g.idx(std::max(i - 1, 0), j, k), ip = g.idx(std::min(i + 1, g.nx - 1), j, k);
          const int jm = g.idx(i, std::max(j - 1, 0), k), jp = g.idx(i, std::min(j + 1, g.ny - 1), k);
          Vec3 grad{diff(im, ip), diff(jm, jp), 0.0};
          if (i == 0 || i == g.nx - 1) grad.x *= 2.0; // one-sided at the wall
          if (j == 0 || j == g.ny - 1) grad.y *= 2.0;
          if (g.dim == 3) {
            const int km = g.idx(i, j, std::max(k - 1, 0)), kp = g.idx(i, j, std::min(k + 1, g.nz - 1));
            grad.z = diff(km, kp);
            if (k == 0 || k == g.nz - 1) grad.z *= 2.0;
          }
          const double gn = grad.norm();
          if (gn < 1e-8) {
            ++geo.degenerate_cells;
            continue;
          }
          geo.normal.set(c, grad * (1.0 / gn));
          // cosine delta times |grad phi|: the discrete surface measure
          geo.delta_weight[c] = gn * (0.5 / w) * (1.0 + std::cos(M_PI * p / w));
        }
      }
  geo.volume = vol;
  return geo;
}

VelocityValidationReport validate_velocity(const Grid& g, const VelocityFieldSpec& spec,
                                           const ShapeSpec& shape,
                                           const std::vector<double>& times,
                                           double tube_width_cells, double M0,
                                           double dt_geom, double div_tol) {
  VelocityValidationReport rep;
  rep.min_volume = std::numeric_limits<double>::infinity();

  if (spec.support_radius >= g.half) {
    rep.support_ok = false;
    rep.warnings.push_back("support radius >= box half-width: V does not vanish inside B");
  }
  // sample |V| outside the support radius
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const Vec3 x = g.center(i, j, k);
        if (x.norm() < spec.support_radius) continue;
        for (double t : times)
          rep.max_speed_outside_support =
              std::max(rep.max_speed_outside_support, eval_velocity(spec, t, x).norm());
      }
  if (rep.max_speed_outside_support > 1e-12) {
    rep.support_ok = false;
    rep.warnings.push_back("nonzero velocity outside the support radius");
  }

  ScalarField phi0f = initial_level_set(g, shape);
  auto phi0 = [&](const Vec3& x) {
    // nearest-cell sample of the initial signed distance
    int i = std::clamp(int((x.x + g.half) / g.dx), 0, g.nx - 1);
    int j = std::clamp(int((x.y + g.half) / g.dx), 0, g.ny - 1);
    int k = g.dim == 3 ? std::clamp(int((x.z + g.half) / g.dx), 0, g.nz - 1) : 0;
    return phi0f[g.idx(i, j, k)];
  };

  const double tube = tube_width_cells * g.dx;
  for (double t : times) {
    ScalarField phi = rebuild_level_set(g, spec, t, phi0, dt_geom);
    DomainGeometry geo = interface_geometry(g, phi);
    rep.min_volume = std::min(rep.min_volume, geo.volume);
    for (int k = 0; k < g.nz; ++k)
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const int c = g.idx(i, j, k);
          if (std::abs(phi[c]) > tube) continue;
          const double dv = std::abs(eval_divergence(spec, t, g.center(i, j, k), 1e-6));
          rep.max_div_in_tube = std::max(rep.max_div_in_tube, dv);
        }
  }
  if (rep.min_volume < M0) {
    rep.volume_floor_ok = false;
    rep.warnings.push_back("volume floor M0 violated");
  }
  if (rep.max_div_in_tube > div_tol) {
    rep.divergence_ok = false;
    rep.warnings.push_back("div V nonzero in the interface tube (run proceeds)");
  }
  return rep;
}

std::string VelocityValidationReport::format() const {
  std::ostringstream os;
  os << "max |div V| in tube:        " << max_div_in_tube << "\n"
     << "max |V| outside support:    " << max_speed_outside_support << "\n"
     << "min |Omega_t|:              " << min_volume << "\n"
     << "support condition:          " << (support_ok ? "ok" : "VIOLATED") << "\n"
     << "volume floor:               " << (volume_floor_ok ? "ok" : "VIOLATED") << "\n"
     << "divergence-free tube:       " << (divergence_ok ? "ok" : "warning") << "\n";
  for (const auto& w : warnings) os << "warning: " << w << "\n";
  return os.str();
}

}  // namespace nsfp
