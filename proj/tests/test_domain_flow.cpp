#include <doctest.h>

#include <cmath>

#include "nsfp/geometry.hpp"

using namespace nsfp;

namespace {

VelocityFieldSpec rotation(double rate) {
  VelocityFieldSpec v;
  v.kind = VelocityKind::RigidRotation;
  v.rate = rate;
  v.support_radius = 1.6;
  v.cutoff_width = 0.4;
  return v;
}

VelocityFieldSpec pulsation(double amp, double freq) {
  VelocityFieldSpec v;
  v.kind = VelocityKind::Pulsation;
  v.amplitude = amp;
  v.frequency = freq;
  v.support_radius = 1.6;
  v.cutoff_width = 0.4;
  return v;
}

}  // namespace

TEST_CASE("flow map: static identity and quarter-turn rotation oracle") {
  VelocityFieldSpec stat;
  const Vec3 seed{0.3, -0.7, 0.0};
  Vec3 out = advance_flow_map(stat, 0.0, 2.0, seed, 1e-2);
  CHECK(out.x == seed.x);
  CHECK(out.y == seed.y);

  const double w = 1.0;
  VelocityFieldSpec rot = rotation(w);
  const Vec3 p{0.5, 0.2, 0.0}; // inside the rigid core
  const double t = M_PI / (2.0 * w);
  Vec3 q = advance_flow_map(rot, 0.0, t, p, 1e-3);
  CHECK(std::abs(q.x - (-p.y)) < 1e-8); // quarter turn
  CHECK(std::abs(q.y - p.x) < 1e-8);
}

TEST_CASE("flow map composition for autonomous fields") {
  VelocityFieldSpec rot = rotation(0.7);
  const Vec3 x0{0.8, -0.3, 0.0};
  Vec3 direct = advance_flow_map(rot, 0.0, 0.9, x0, 1e-3);
  Vec3 mid = advance_flow_map(rot, 0.0, 0.4, x0, 1e-3);
  Vec3 composed = advance_flow_map(rot, 0.4, 0.9, mid, 1e-3);
  CHECK((direct - composed).norm() < 1e-10);
}

TEST_CASE("divergence-free built-in preserves polygonal area (shoelace oracle)") {
  VelocityFieldSpec rot = rotation(0.8);
  // off-center circle spanning the differential-rotation band deforms but
  // keeps its area
  const int N = 256;
  std::vector<Vec3> seeds;
  for (int i = 0; i < N; ++i) {
    const double a = 2.0 * M_PI * i / N;
    seeds.push_back({0.5 + 0.4 * std::cos(a), 0.4 * std::sin(a), 0.0});
  }
  auto shoelace = [](const std::vector<Vec3>& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec3& a = poly[i];
      const Vec3& b = poly[(i + 1) % poly.size()];
      s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::abs(s);
  };
  const double area0 = shoelace(seeds);
  std::vector<Vec3> mapped = advance_flow_map(rot, 0.0, 1.0, seeds, 1e-3);
  const double area1 = shoelace(mapped);
  CHECK(std::abs(area1 - area0) / area0 < 1e-4);
}

TEST_CASE("level set rebuild: identity at t = 0") {
  Grid g(2, 48, 2.0);
  auto phi0 = [](const Vec3& x) { return x.norm() - 0.8; };
  ScalarField phi = rebuild_level_set(g, rotation(0.5), 0.0, phi0, 1e-3);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      CHECK(phi[g.idx(i, j, 0)] == phi0(g.center(i, j, 0)));
}

TEST_CASE("rotating disc: sign agreement with the analytic indicator at 128^2") {
  Grid g(2, 128, 2.0);
  const double w = 0.8, t = 0.7;
  VelocityFieldSpec rot = rotation(w);
  const Vec3 c0{0.4, 0.0, 0.0};
  const double r0 = 0.55; // stays inside the rigid core
  auto phi0 = [&](const Vec3& x) { return (x - c0).norm() - r0; };
  ScalarField phi = rebuild_level_set(g, rot, t, phi0, 1e-3);

  int agree = 0, total = 0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Vec3 x = g.center(i, j, 0);
      const double ca = std::cos(-w * t), sa = std::sin(-w * t);
      const Vec3 back{ca * x.x - sa * x.y, sa * x.x + ca * x.y, 0.0};
      const bool inside_exact = (back - c0).norm() < r0;
      const bool inside_num = phi[g.idx(i, j, 0)] < 0.0;
      ++total;
      if (inside_exact == inside_num) ++agree;
    }
  CHECK(double(agree) / total >= 0.999);

  // reinitialized gradient stays near 1 on the band
  DomainGeometry geo = interface_geometry(g, phi);
  for (int j = 1; j + 1 < g.ny; ++j)
    for (int i = 1; i + 1 < g.nx; ++i) {
      const int c = g.idx(i, j, 0);
      if (std::abs(phi[c]) > geo.band_half_width) continue;
      const double gx = (phi[g.idx(i + 1, j, 0)] - phi[g.idx(i - 1, j, 0)]) / (2 * g.dx);
      const double gy = (phi[g.idx(i, j + 1, 0)] - phi[g.idx(i, j - 1, 0)]) / (2 * g.dx);
      const double gn = std::sqrt(gx * gx + gy * gy);
      CHECK(gn > 0.5);
      CHECK(gn < 2.0);
    }
}

TEST_CASE("pulsating circle radius matches the separable ODE solution") {
  Grid g(2, 96, 2.0);
  const double A = 0.3, f = 1.0, r0 = 0.5, t = 0.3;
  VelocityFieldSpec pul = pulsation(A, f);
  auto phi0 = [&](const Vec3& x) { return x.norm() - r0; };
  ScalarField phi = rebuild_level_set(g, pul, t, phi0, 1e-3);

  // dr/dt = A sin(2 pi f t) r  =>  r(t) = r0 exp(A (1 - cos(2 pi f t)) / (2 pi f))
  const double r_exact = r0 * std::exp(A * (1.0 - std::cos(2.0 * M_PI * f * t)) /
                                       (2.0 * M_PI * f));

  // zero crossing along the +x axis
  const int j = g.ny / 2;
  double r_num = -1.0;
  for (int i = g.nx / 2; i + 1 < g.nx; ++i) {
    const double a = phi[g.idx(i, j, 0)], b = phi[g.idx(i + 1, j, 0)];
    if (a < 0.0 && b >= 0.0) {
      r_num = g.cx(i) + g.dx * a / (a - b);
      break;
    }
  }
  REQUIRE(r_num > 0.0);
  CHECK(std::abs(r_num - r_exact) < 1.5 * g.dx);
}

TEST_CASE("interface geometry: perimeter, normals, 3-D area") {
  SUBCASE("circle perimeter from the delta weight within 5%") {
    Grid g(2, 64, 2.0);
    const double r = 1.0;
    ShapeSpec s;
    s.kind = ShapeKind::Circle;
    s.r = r;
    ScalarField phi = initial_level_set(g, s);
    DomainGeometry geo = interface_geometry(g, phi);
    double perim = 0.0;
    for (int c = 0; c < g.size(); ++c) perim += geo.delta_weight[c] * g.cell_volume();
    CHECK(perim > 0.95 * 2.0 * M_PI * r);
    CHECK(perim < 1.05 * 2.0 * M_PI * r);
    CHECK(std::abs(geo.volume - M_PI * r * r) / (M_PI * r * r) < 0.01);

    // unit normals on the band
    for (int c = 0; c < g.size(); ++c)
      if (geo.delta_weight[c] > 0.0)
        CHECK(std::abs(geo.normal.at(c).norm() - 1.0) < 1e-12);
  }

  SUBCASE("flat half-space interface has a constant exact normal") {
    Grid g(2, 32, 2.0);
    ShapeSpec s;
    s.kind = ShapeKind::HalfSpace;
    s.normal = {1.0, 0.0, 0.0};
    ScalarField phi = initial_level_set(g, s);
    DomainGeometry geo = interface_geometry(g, phi);
    int banded = 0;
    for (int c = 0; c < g.size(); ++c)
      if (std::abs(geo.phi[c]) < geo.band_half_width) {
        ++banded;
        CHECK(geo.normal.x[c] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(geo.normal.y[c] == doctest::Approx(0.0).epsilon(1e-12));
      }
    CHECK(banded > 0);
  }

  SUBCASE("coarse 3-D sphere area within 8%") {
    Grid g(3, 32, 2.0);
    const double r = 1.0;
    ShapeSpec s;
    s.kind = ShapeKind::Circle; // sphere in 3-D
    s.r = r;
    ScalarField phi = initial_level_set(g, s);
    DomainGeometry geo = interface_geometry(g, phi);
    double area = 0.0;
    for (int c = 0; c < g.size(); ++c) area += geo.delta_weight[c] * g.cell_volume();
    const double exact = 4.0 * M_PI * r * r;
    CHECK(std::abs(area - exact) / exact < 0.08);
  }
}

TEST_CASE("volume drift of a rotated disc below 1e-3 over T = 1 at 128^2") {
  Grid g(2, 128, 2.0);
  VelocityFieldSpec rot = rotation(0.6);
  const Vec3 c0{0.3, 0.1, 0.0};
  auto phi0 = [&](const Vec3& x) { return (x - c0).norm() - 0.6; };

  ScalarField phiA = rebuild_level_set(g, rot, 0.0, phi0, 2e-3);
  ScalarField phiB = rebuild_level_set(g, rot, 1.0, phi0, 2e-3);
  const double v0 = interface_geometry(g, phiA).volume;
  const double v1 = interface_geometry(g, phiB).volume;
  CHECK(std::abs(v1 - v0) / v0 < 1e-3);
}

TEST_CASE("velocity validation report") {
  Grid g(2, 48, 2.0);
  ShapeSpec s;
  s.kind = ShapeKind::Ellipse;
  s.rx = 1.0;
  s.ry = 0.7;

  SUBCASE("rigid rotation is divergence-free in the tube") {
    VelocityValidationReport rep =
        validate_velocity(g, rotation(0.5), s, {0.0, 0.25, 0.5}, 3.0, 0.5, 2e-3);
    CHECK(rep.max_div_in_tube < 1e-8);
    CHECK(rep.support_ok);
    CHECK(rep.divergence_ok);
    CHECK(rep.volume_floor_ok);
    CHECK(rep.min_volume > M_PI * 1.0 * 0.7 * 0.95);
  }

  SUBCASE("radial pulsation reports nonzero divergence but proceeds") {
    VelocityValidationReport rep =
        validate_velocity(g, pulsation(0.3, 1.0), s, {0.3}, 3.0, 0.5, 2e-3);
    CHECK(rep.max_div_in_tube > 0.1);
    CHECK_FALSE(rep.divergence_ok);
    CHECK(!rep.warnings.empty());
  }

  SUBCASE("support radius at the box half-width is flagged") {
    VelocityFieldSpec bad = rotation(0.5);
    bad.support_radius = 2.0; // equals the box half-width
    VelocityValidationReport rep = validate_velocity(g, bad, s, {0.0}, 3.0, 0.5, 2e-3);
    CHECK_FALSE(rep.support_ok);
  }

  SUBCASE("volume floor above the domain size is violated") {
    VelocityValidationReport rep =
        validate_velocity(g, rotation(0.5), s, {0.0}, 3.0, 100.0, 2e-3);
    CHECK_FALSE(rep.volume_floor_ok);
  }
}

TEST_CASE("tabulated velocity round trip") {
  // write a small rigid-rotation table and compare the interpolant
  const std::string path = "test_velocity_table.dat";
  {
    FILE* f = std::fopen(path.c_str(), "w");
    REQUIRE(f);
    const int n = 64;
    const double half = 2.0, dx = 2.0 * half / n;
    std::fprintf(f, "2 %d %.17g\n", n, half);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const double x = -half + (i + 0.5) * dx, y = -half + (j + 0.5) * dx;
        std::fprintf(f, "%.17g %.17g\n", -0.5 * y, 0.5 * x);
      }
    std::fclose(f);
  }
  VelocityFieldSpec tab = load_tabulated_velocity(path);
  const Vec3 x{0.37, -0.52, 0.0};
  const Vec3 v = eval_velocity(tab, 0.0, x);
  CHECK(v.x == doctest::Approx(-0.5 * x.y).epsilon(1e-10));
  CHECK(v.y == doctest::Approx(0.5 * x.x).epsilon(1e-10));
  std::remove(path.c_str());
}
