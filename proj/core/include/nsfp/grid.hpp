#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "nsfp/errors.hpp"

namespace nsfp {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

using ScalarField = std::vector<double>;

// Uniform cell-centered Cartesian grid over the box [-half, half]^dim.
// In 2D the z direction collapses to a single layer (nz = 1).
struct Grid {
  int dim = 2;
  int n = 0;         // cells per side
  double half = 0.0; // box half-width
  double dx = 0.0;
  int nx = 0, ny = 0, nz = 1;

  Grid() = default;
  Grid(int dim_, int n_, double half_) : dim(dim_), n(n_), half(half_) {
    if (dim != 2 && dim != 3) throw ConfigError("grid: dimension must be 2 or 3");
    if (n < 4) throw ConfigError("grid: need at least 4 cells per side");
    if (half <= 0.0) throw ConfigError("grid: box half-width must be positive");
    nx = ny = n;
    nz = (dim == 3) ? n : 1;
    dx = 2.0 * half / n;
  }

  int size() const { return nx * ny * nz; }
  int idx(int i, int j, int k) const { return i + nx * (j + ny * k); }
  double cell_volume() const { return dim == 2 ? dx * dx : dx * dx * dx; }

  double cx(int i) const { return -half + (i + 0.5) * dx; }
  double cy(int j) const { return -half + (j + 0.5) * dx; }
  double cz(int k) const { return dim == 3 ? -half + (k + 0.5) * dx : 0.0; }
  Vec3 center(int i, int j, int k) const { return {cx(i), cy(j), cz(k)}; }

  bool on_wall(int i, int j, int k) const {
    bool w = i == 0 || i == nx - 1 || j == 0 || j == ny - 1;
    if (dim == 3) w = w || k == 0 || k == nz - 1;
    return w;
  }

  ScalarField make_scalar(double fill = 0.0) const { return ScalarField(size(), fill); }
};

struct VectorField {
  ScalarField x, y, z;

  VectorField() = default;
  explicit VectorField(const Grid& g)
      : x(g.size(), 0.0), y(g.size(), 0.0), z(g.size(), 0.0) {}

  Vec3 at(int c) const { return {x[c], y[c], z[c]}; }
  void set(int c, const Vec3& v) {
    x[c] = v.x;
    y[c] = v.y;
    z[c] = v.z;
  }
  std::size_t size() const { return x.size(); }
};

// Compensated sum; diagnostics compare totals across thousands of steps.
inline double kahan_sum(const ScalarField& f) {
  double s = 0.0, c = 0.0;
  for (double v : f) {
    double y = v - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

}  // namespace nsfp
