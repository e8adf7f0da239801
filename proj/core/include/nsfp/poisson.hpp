#pragma once

#include "nsfp/grid.hpp"

namespace nsfp {

struct GravityParams {
  double g = 0.05;
  double tolerance = 1e-10; // relative residual
  int max_iterations = 20000;

  void validate() const {
    if (!(g > 0.0)) throw ConfigError("gravity: g must be > 0");
    if (!(tolerance > 0.0 && tolerance <= 1e-4))
      throw ConfigError("gravity: tolerance must lie in (0, 1e-4]");
    if (max_iterations < 1) throw ConfigError("gravity: max_iterations must be >= 1");
  }
};

// Solves -Lap Psi = 4 pi g (rho - mean rho) on the box with homogeneous
// Neumann walls (the mean-removed source is the compatibility projection),
// then shifts Psi to zero mean.  Matrix-free CG on the 5/7-point stencil.
class PoissonSolver {
 public:
  PoissonSolver(const Grid& g, GravityParams p);

  // `psi` doubles as the warm start; returns the iteration count.
  int solve(const ScalarField& rho, ScalarField& psi) const;

  // Neumann Laplacian applied with mirrored ghosts; exposed for the discrete
  // energy-identity check sum(grad Psi . grad Psi) = 4 pi g sum((rho-mean) Psi).
  void apply_neg_laplacian(const ScalarField& in, ScalarField& out) const;

  // sum over faces of (d Psi)^2 dV, the discrete Dirichlet energy matching
  // the stencil above.
  double dirichlet_energy(const ScalarField& psi) const;

  const GravityParams& params() const { return params_; }

 private:
  Grid grid_;
  GravityParams params_;
};

// Central differences in the interior, mirrored ghosts at the walls
// (consistent with d Psi / dn = 0).
VectorField potential_gradient(const Grid& g, const ScalarField& psi);

}  // namespace nsfp
