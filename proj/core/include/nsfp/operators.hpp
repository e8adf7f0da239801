#pragma once

#include "nsfp/grid.hpp"

namespace nsfp {

// Cell-centered velocity gradient; central differences inside, one-sided at
// the walls.
struct VelGrad {
  double g[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}; // g[a][b] = d u_a / d x_b
  double div = 0.0;
};

inline VelGrad velocity_gradient(const Grid& g, const VectorField& u, int i, int j, int k) {
  VelGrad out;
  const double* comp[3] = {u.x.data(), u.y.data(), u.z.data()};
  const int c = g.idx(i, j, k);
  auto axis = [&](int b, int cm, int cp, bool onedm, bool onedp) {
    for (int a = 0; a < 3; ++a) {
      double num = comp[a][cp] - comp[a][cm];
      double den = 2.0 * g.dx;
      if (onedm || onedp) den = g.dx; // one-sided at the wall
      out.g[a][b] = num / den;
    }
    (void)c;
  };
  axis(0, g.idx(std::max(i - 1, 0), j, k), g.idx(std::min(i + 1, g.nx - 1), j, k), i == 0,
       i == g.nx - 1);
  axis(1, g.idx(i, std::max(j - 1, 0), k), g.idx(i, std::min(j + 1, g.ny - 1), k), j == 0,
       j == g.ny - 1);
  if (g.dim == 3)
    axis(2, g.idx(i, j, std::max(k - 1, 0)), g.idx(i, j, std::min(k + 1, g.nz - 1)), k == 0,
         k == g.nz - 1);
  out.div = out.g[0][0] + out.g[1][1] + out.g[2][2];
  return out;
}

// S : grad u for S = mu (D - (2/3) div I) + eta div I, D = grad u + grad u^T,
// in the algebraically nonnegative form mu (|D|^2/2 - (2/3) div^2) + eta div^2.
inline double stress_dissipation(double mu, double eta, const VelGrad& v) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double dab = v.g[a][b] + v.g[b][a];
      d2 += dab * dab;
    }
  return mu * (0.5 * d2 - (2.0 / 3.0) * v.div * v.div) + eta * v.div * v.div;
}

// x^p for x >= 0 with fast paths for the common conductivity exponents.
inline double pow_positive(double x, double p) {
  if (p == 6.5) {
    const double x2 = x * x;
    return x2 * x2 * x2 * std::sqrt(x);
  }
  if (p == 7.5) {
    const double x2 = x * x;
    return x2 * x2 * x2 * x * std::sqrt(x);
  }
  if (p == 4.0) {
    const double x2 = x * x;
    return x2 * x2;
  }
  return std::pow(x, p);
}

// Frobenius norm of S(theta, grad u).
inline double stress_frobenius(double mu, double eta, const VelGrad& v) {
  double s2 = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double dab = v.g[a][b] + v.g[b][a];
      double s = mu * dab;
      if (a == b) s += -mu * (2.0 / 3.0) * v.div + eta * v.div;
      s2 += s * s;
    }
  return std::sqrt(s2);
}

}  // namespace nsfp
