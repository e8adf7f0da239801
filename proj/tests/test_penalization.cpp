#include <doctest.h>

#include <cmath>

#include "nsfp/penalty.hpp"

using namespace nsfp;

TEST_CASE("scaling schedule values and monotonicity") {
  ScheduleFloors f1 = scaling_schedule(1.0);
  CHECK(f1.lambda == 1.0);
  CHECK(f1.nu == 1.0);
  CHECK(f1.omega == 1.0);
  CHECK(f1.xi == 1.0);

  ScheduleFloors fh = scaling_schedule(0.5);
  CHECK(fh.lambda == doctest::Approx(0.5));
  CHECK(fh.nu == doctest::Approx(0.125));
  CHECK(fh.omega == doctest::Approx(0.125));
  CHECK(fh.xi == doctest::Approx(0.015625));

  CHECK(scaling_schedule(0.1).xi == doctest::Approx(1e-6).epsilon(1e-12));

  CHECK_THROWS_AS(scaling_schedule(0.0), std::domain_error);
  CHECK_THROWS_AS(scaling_schedule(1.5), std::domain_error);

  // strictly monotone in h
  double prev_l = 0, prev_n = 0, prev_o = 0, prev_x = 0;
  for (double h = 0.05; h <= 1.0; h += 0.05) {
    ScheduleFloors f = scaling_schedule(h);
    CHECK(f.lambda > prev_l);
    CHECK(f.nu > prev_n);
    CHECK(f.omega > prev_o);
    CHECK(f.xi > prev_x);
    prev_l = f.lambda;
    prev_n = f.nu;
    prev_o = f.omega;
    prev_x = f.xi;
  }
}

TEST_CASE("masks: fluid identity, deep solid floors, ramp band") {
  Grid g(2, 32, 2.0);
  PenaltyParams pp;
  pp.omega = 0.2;
  pp.nu = 0.3;
  pp.xi = 0.4;

  SUBCASE("all-fluid level set") {
    ScalarField phi = g.make_scalar(-1.0);
    MaskFields m = build_masks(g, phi, pp);
    for (int c = 0; c < g.size(); ++c) {
      CHECK(m.f_omega[c] == 1.0);
      CHECK(m.chi_nu[c] == 1.0);
      CHECK(m.chi_xi[c] == 1.0);
    }
  }

  SUBCASE("deep solid carries the floors, sharp chi switches") {
    ScalarField phi = g.make_scalar(10.0 * g.dx);
    MaskFields m = build_masks(g, phi, pp);
    for (int c = 0; c < g.size(); ++c) {
      CHECK(m.f_omega[c] == doctest::Approx(0.2));
      CHECK(m.chi_nu[c] == 0.3);
      CHECK(m.chi_xi[c] == 0.4);
    }
  }

  SUBCASE("half-solid box: ramp values and exact-one fluid side") {
    // phi = x: interface at x = 0
    ScalarField phi = g.make_scalar();
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) phi[g.idx(i, j, 0)] = g.cx(i);
    MaskFields m = build_masks(g, phi, pp, 3.0);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, 0);
        const double x = g.cx(i);
        if (x <= 0.0) {
          CHECK(m.f_omega[c] == 1.0);
          CHECK(m.chi_nu[c] == 1.0);
        } else {
          CHECK(m.chi_nu[c] == pp.nu);
          CHECK(m.chi_xi[c] == pp.xi);
          CHECK(m.f_omega[c] >= pp.omega);
          CHECK(m.f_omega[c] <= 1.0);
          if (x >= 3.0 * g.dx) {
            CHECK(m.f_omega[c] == doctest::Approx(pp.omega));
          } else {
            const double expected =
                pp.omega +
                (1.0 - pp.omega) * 0.5 * (1.0 + std::cos(M_PI * x / (3.0 * g.dx)));
            CHECK(m.f_omega[c] == doctest::Approx(expected).epsilon(1e-13));
          }
        }
      }
  }

  CHECK_THROWS_AS(build_masks(g, g.make_scalar(), pp, 0.5), ConfigError);
}

TEST_CASE("mask solid L^p bound on a half-solid box (direct summation oracle)") {
  Grid g(2, 64, 2.0);
  PenaltyParams pp;
  pp.omega = 0.2;
  pp.alpha = 6.5;
  ScalarField phi = g.make_scalar();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) phi[g.idx(i, j, 0)] = g.cx(i);
  MaskFields m = build_masks(g, phi, pp, 3.0);

  const double p = (pp.alpha + 1.0) / (pp.alpha - 1.0);
  double norm_p = 0.0, solid_vol = 0.0;
  for (int c = 0; c < g.size(); ++c) {
    if (phi[c] <= 0.0) continue;
    norm_p += std::pow(m.f_omega[c], p) * g.cell_volume();
    solid_vol += g.cell_volume();
  }
  const double lhs = std::pow(norm_p, 1.0 / p);
  const double rhs = 2.0 * pp.omega * std::pow(solid_vol, 1.0 / p);
  CHECK(lhs <= rhs);
}

TEST_CASE("penalized pressure reduces bitwise and carries the delta term") {
  Eos eos(EosParams{});
  PenaltyParams pp;

  pp.delta = 0.0;
  CHECK(penalized_pressure(eos, 0.8, 1.3, 1.0, pp) == eos.pressure(0.8, 1.3));

  pp.delta = 0.1;
  pp.beta = 4.0;
  CHECK(penalized_pressure(eos, 1.0, 1.0, 1.0, pp) ==
        doctest::Approx(1.5 + 1.0 / 3.0 + 0.1).epsilon(1e-14));

  // solid cell: radiation scaled by chi_xi
  pp.delta = 0.0;
  const double xi = 1e-6;
  const double p_solid = penalized_pressure(eos, 0.0, 2.0, xi, pp);
  CHECK(p_solid == doctest::Approx(xi * (1.0 / 3.0) * 16.0).epsilon(1e-12));
}

TEST_CASE("penalized energy and entropy densities") {
  Eos eos(EosParams{});

  SUBCASE("fluid cell is identical to the constitutive closure") {
    PenalizedThermo pt = penalized_energy_entropy(eos, 0.7, 1.9, 1.0);
    CHECK(pt.e_density == eos.energy_density(0.7, 1.9));
    CHECK(pt.s_density == doctest::Approx(0.7 * eos.entropy(0.7, 1.9)).epsilon(1e-14));
  }

  SUBCASE("solid cell scales the radiative parts") {
    PenalizedThermo pt = penalized_energy_entropy(eos, 1.0, 1.0, 0.5);
    CHECK(pt.e_density == doctest::Approx(2.25 + 0.5).epsilon(1e-14));
    CHECK(pt.s_density ==
          doctest::Approx(std::log(2.0) + 0.75 + 0.5 * 4.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("penalized coercivity rho e_xi >= a_xi theta^4 + (3/2) p_inf rho^{5/3}") {
    for (double xi : {1e-6, 0.3, 1.0})
      for (double rho : {1e-4, 0.3, 2.0, 50.0})
        for (double th : {0.1, 1.0, 7.0}) {
          PenalizedThermo pt = penalized_energy_entropy(eos, rho, th, xi);
          const double t2 = th * th;
          CHECK(pt.e_density - xi * t2 * t2 - 1.5 * std::pow(rho, 5.0 / 3.0) >=
                -1e-12 * pt.e_density);
        }
  }

  CHECK_THROWS_AS(penalized_energy_entropy(eos, 0.0, 1.0, 1.0), std::domain_error);
}

TEST_CASE("mollified transport coefficients") {
  TransportParams tp;
  tp.mu_lo = 0.4;
  tp.mu_hi = 0.8;
  tp.eta_lo = 0.2;
  tp.eta_hi = 0.4;
  tp.kappa_lo = 1.0;
  tp.kappa_hi = 2.0;
  tp.alpha = 7.0;

  MollifiedTransport fluid = mollified_transport(1.0, 1.0, 1.0, tp);
  TransportCoeffs plain = transport(1.0, tp);
  CHECK(fluid.mu == plain.mu);
  CHECK(fluid.eta == plain.eta);
  CHECK(fluid.kappa == plain.kappa);

  MollifiedTransport deep = mollified_transport(1.0, 1e-3, 1e-3, tp);
  CHECK(deep.mu == doctest::Approx(1e-3 * plain.mu));
  CHECK(deep.kappa == doctest::Approx(1e-3 * plain.kappa));

  // solid, nu = 1e-3, theta = 1, kappa_lo = 1, alpha = 7 -> kappa_nu = 2e-3
  MollifiedTransport solid = mollified_transport(1.0, 1.0, 1e-3, tp);
  CHECK(solid.kappa == doctest::Approx(2e-3).epsilon(1e-13));
}

TEST_CASE("penalty parameter validation") {
  PenaltyParams pp;
  pp.beta = 3.0;
  CHECK_THROWS_AS(pp.validate(), ConfigError);
  pp = PenaltyParams{};
  pp.eps = 0.0;
  CHECK_THROWS_AS(pp.validate(), ConfigError);
  pp = PenaltyParams{};
  apply_scaling_schedule(pp, 0.35);
  CHECK(pp.lambda == doctest::Approx(0.35));
  CHECK(pp.xi == doctest::Approx(std::pow(0.35, 6.0)).epsilon(1e-13));
  pp.validate();
}
