#include <doctest.h>

#include <cmath>

#include "nsfp/poisson.hpp"

using namespace nsfp;

namespace {

// Neumann-compatible manufactured solution on [-L, L]^2:
//   Psi* = cos(pi (x+L) / (2L)) cos(pi (y+L) / (2L)), zero normal derivative
//   on all four walls, and rho - mean = -Lap Psi* / (4 pi g).
struct Manufactured {
  double L, g;
  double k() const { return M_PI / (2.0 * L); }
  double psi(const Vec3& x) const {
    return std::cos(k() * (x.x + L)) * std::cos(k() * (x.y + L));
  }
  double rho(const Vec3& x, double mean) const {
    // -Lap Psi* = 2 k^2 Psi*
    return mean + 2.0 * k() * k() * psi(x) / (4.0 * M_PI * g);
  }
};

double l2_error(const Grid& g, const ScalarField& a, const ScalarField& b) {
  double acc = 0.0;
  for (int c = 0; c < g.size(); ++c) acc += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(acc * g.cell_volume());
}

}  // namespace

TEST_CASE("constant density gives a vanishing potential") {
  Grid g(2, 32, 2.0);
  PoissonSolver solver(g, GravityParams{});
  ScalarField rho = g.make_scalar(0.7);
  ScalarField psi;
  solver.solve(rho, psi);
  for (double v : psi) CHECK(std::abs(v) < 1e-14);
}

TEST_CASE("manufactured solution: second-order convergence and energy identity") {
  GravityParams gp;
  gp.g = 0.05;
  gp.tolerance = 1e-12;
  Manufactured mf{2.0, gp.g};

  std::vector<double> hs, errs;
  for (int n : {32, 64, 128}) {
    Grid g(2, n, mf.L);
    PoissonSolver solver(g, gp);
    ScalarField rho(g.size()), exact(g.size());
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, 0);
        rho[c] = mf.rho(g.center(i, j, 0), 1.0);
        exact[c] = mf.psi(g.center(i, j, 0));
      }
    ScalarField psi;
    solver.solve(rho, psi);

    // exact solution has zero mean only up to quadrature; remove both means
    double me = 0.0;
    for (double v : exact) me += v;
    me /= g.size();
    for (double& v : exact) v -= me;

    hs.push_back(g.dx);
    errs.push_back(l2_error(g, psi, exact));

    // discrete energy identity at the solver's own stencil
    double rhs = 0.0, mean = 0.0;
    for (double r : rho) mean += r;
    mean /= g.size();
    for (int c = 0; c < g.size(); ++c)
      rhs += 4.0 * M_PI * gp.g * (rho[c] - mean) * psi[c] * g.cell_volume();
    const double lhs = solver.dirichlet_energy(psi);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));

    // zero mean to 1e-12 * ||Psi||
    double pm = 0.0, pn = 0.0;
    for (double v : psi) {
      pm += v;
      pn += v * v;
    }
    CHECK(std::abs(pm / g.size()) <= 1e-12 * std::sqrt(pn / g.size()));
  }

  const double slope01 = std::log(errs[0] / errs[1]) / std::log(hs[0] / hs[1]);
  const double slope12 = std::log(errs[1] / errs[2]) / std::log(hs[1] / hs[2]);
  CHECK(slope01 >= 1.8);
  CHECK(slope12 >= 1.8);
}

TEST_CASE("solver is linear to tolerance") {
  Grid g(2, 48, 2.0);
  GravityParams gp;
  gp.tolerance = 1e-12;
  PoissonSolver solver(g, gp);
  ScalarField r1(g.size()), r2(g.size());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Vec3 x = g.center(i, j, 0);
      r1[g.idx(i, j, 0)] = std::exp(-2.0 * x.dot(x));
      r2[g.idx(i, j, 0)] = std::exp(-3.0 * (x - Vec3{0.5, 0, 0}).dot(x - Vec3{0.5, 0, 0}));
    }
  ScalarField p1, p2, p12;
  solver.solve(r1, p1);
  solver.solve(r2, p2);
  ScalarField combo(g.size());
  for (int c = 0; c < g.size(); ++c) combo[c] = 2.0 * r1[c] + 0.5 * r2[c];
  solver.solve(combo, p12);
  double scale = 0.0;
  for (int c = 0; c < g.size(); ++c) scale = std::max(scale, std::abs(p12[c]));
  for (int c = 0; c < g.size(); ++c)
    CHECK(std::abs(p12[c] - 2.0 * p1[c] - 0.5 * p2[c]) <= 1e-8 * scale);
}

TEST_CASE("W^{1,2} bound ratio stable under refinement (compact blob)") {
  GravityParams gp;
  std::vector<double> ratios;
  for (int n : {32, 64, 128}) {
    Grid g(2, n, 2.0);
    PoissonSolver solver(g, gp);
    ScalarField rho(g.size());
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const Vec3 x = g.center(i, j, 0);
        const double r2 = x.dot(x) / 0.25;
        rho[g.idx(i, j, 0)] = r2 < 1.0 ? std::pow(1.0 - r2, 3) : 0.0;
      }
    ScalarField psi;
    solver.solve(rho, psi);
    double w12 = solver.dirichlet_energy(psi), rho65 = 0.0;
    for (int c = 0; c < g.size(); ++c) {
      w12 += psi[c] * psi[c] * g.cell_volume();
      rho65 += std::pow(rho[c], 1.2) * g.cell_volume();
    }
    ratios.push_back(std::sqrt(w12) / std::pow(rho65, 5.0 / 6.0));
  }
  const double lo = std::min({ratios[0], ratios[1], ratios[2]});
  const double hi = std::max({ratios[0], ratios[1], ratios[2]});
  CHECK(hi / lo < 1.05);
}

TEST_CASE("potential gradient: constants, quadratics, manufactured order") {
  Grid g(2, 64, 2.0);

  SUBCASE("constant field has zero gradient") {
    ScalarField psi = g.make_scalar(3.14);
    VectorField grad = potential_gradient(g, psi);
    for (int c = 0; c < g.size(); ++c) {
      CHECK(grad.x[c] == 0.0);
      CHECK(grad.y[c] == 0.0);
    }
  }

  SUBCASE("x^2 is differentiated exactly in the interior") {
    ScalarField psi(g.size());
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) psi[g.idx(i, j, 0)] = g.cx(i) * g.cx(i);
    VectorField grad = potential_gradient(g, psi);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 1; i + 1 < g.nx; ++i)
        CHECK(grad.x[g.idx(i, j, 0)] ==
              doctest::Approx(2.0 * g.cx(i)).epsilon(1e-12));
  }

  SUBCASE("gradient of the manufactured potential is second order") {
    Manufactured mf{2.0, 0.05};
    std::vector<double> hs, errs;
    for (int n : {32, 64}) {
      Grid gg(2, n, mf.L);
      ScalarField psi(gg.size());
      for (int j = 0; j < gg.ny; ++j)
        for (int i = 0; i < gg.nx; ++i)
          psi[gg.idx(i, j, 0)] = mf.psi(gg.center(i, j, 0));
      VectorField grad = potential_gradient(gg, psi);
      double err = 0.0;
      const double k = mf.k();
      for (int j = 0; j < gg.ny; ++j)
        for (int i = 0; i < gg.nx; ++i) {
          const Vec3 x = gg.center(i, j, 0);
          const double gx = -k * std::sin(k * (x.x + mf.L)) * std::cos(k * (x.y + mf.L));
          const double gy = -k * std::cos(k * (x.x + mf.L)) * std::sin(k * (x.y + mf.L));
          const int c = gg.idx(i, j, 0);
          err += (grad.x[c] - gx) * (grad.x[c] - gx) + (grad.y[c] - gy) * (grad.y[c] - gy);
        }
      hs.push_back(gg.dx);
      errs.push_back(std::sqrt(err * gg.cell_volume()));
    }
    CHECK(std::log(errs[0] / errs[1]) / std::log(hs[0] / hs[1]) >= 1.8);
  }
}

TEST_CASE("gravity parameter validation") {
  GravityParams gp;
  gp.g = 0.0;
  CHECK_THROWS_AS(gp.validate(), ConfigError);
  gp = GravityParams{};
  gp.tolerance = 1e-3;
  CHECK_THROWS_AS(gp.validate(), ConfigError);
}
