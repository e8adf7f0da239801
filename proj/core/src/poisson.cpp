#include "nsfp/poisson.hpp"

#include <cmath>
#include <sstream>

#include "nsfp/errors.hpp"

namespace nsfp {

PoissonSolver::PoissonSolver(const Grid& g, GravityParams p) : grid_(g), params_(p) {
  params_.validate();
}

void PoissonSolver::apply_neg_laplacian(const ScalarField& in, ScalarField& out) const {
  const Grid& g = grid_;
  const double inv_dx2 = 1.0 / (g.dx * g.dx);
  out.resize(in.size());
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double v = in[c];
        double acc = 0.0;
        // mirrored ghost = zero flux through the wall face
        acc += (i > 0 ? in[g.idx(i - 1, j, k)] : v) - v;
        acc += (i < g.nx - 1 ? in[g.idx(i + 1, j, k)] : v) - v;
        acc += (j > 0 ? in[g.idx(i, j - 1, k)] : v) - v;
        acc += (j < g.ny - 1 ? in[g.idx(i, j + 1, k)] : v) - v;
        if (g.dim == 3) {
          acc += (k > 0 ? in[g.idx(i, j, k - 1)] : v) - v;
          acc += (k < g.nz - 1 ? in[g.idx(i, j, k + 1)] : v) - v;
        }
        out[c] = -acc * inv_dx2;
      }
}

double PoissonSolver::dirichlet_energy(const ScalarField& psi) const {
  const Grid& g = grid_;
  const double dV = g.cell_volume();
  double e = 0.0;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        if (i + 1 < g.nx) {
          const double d = (psi[g.idx(i + 1, j, k)] - psi[c]) / g.dx;
          e += d * d * dV;
        }
        if (j + 1 < g.ny) {
          const double d = (psi[g.idx(i, j + 1, k)] - psi[c]) / g.dx;
          e += d * d * dV;
        }
        if (g.dim == 3 && k + 1 < g.nz) {
          const double d = (psi[g.idx(i, j, k + 1)] - psi[c]) / g.dx;
          e += d * d * dV;
        }
      }
  return e;
}

int PoissonSolver::solve(const ScalarField& rho, ScalarField& psi) const {
  const Grid& g = grid_;
  const int N = g.size();
  if (static_cast<int>(rho.size()) != N)
    throw NumericalError("poisson: rho field size mismatch");
  if (static_cast<int>(psi.size()) != N) psi.assign(N, 0.0);

  // mean-removed right-hand side; the pure Neumann problem needs a
  // compatible (zero-mean) source
  ScalarField b(N);
  double mean = 0.0;
  for (double r : rho) mean += r;
  mean /= N;
  const double fourpig = 4.0 * M_PI * params_.g;
  for (int c = 0; c < N; ++c) b[c] = fourpig * (rho[c] - mean);
  double bmean = 0.0;
  for (double v : b) bmean += v;
  bmean /= N;
  for (double& v : b) v -= bmean; // exact floating-point compatibility

  double bnorm = 0.0, rho_scale = 0.0;
  for (int c = 0; c < N; ++c) {
    bnorm += b[c] * b[c];
    rho_scale += fourpig * rho[c] * fourpig * rho[c];
  }
  bnorm = std::sqrt(bnorm);
  rho_scale = std::sqrt(rho_scale);
  if (bnorm <= 1e-13 * rho_scale || bnorm == 0.0) {
    psi.assign(N, 0.0); // source is rounding noise of a constant density
    return 0;
  }

  ScalarField r(N), p(N), Ap(N);
  apply_neg_laplacian(psi, Ap);
  for (int c = 0; c < N; ++c) r[c] = b[c] - Ap[c];
  p = r;
  double rr = 0.0;
  for (double v : r) rr += v * v;

  int it = 0;
  for (; it < params_.max_iterations; ++it) {
    if (std::sqrt(rr) <= params_.tolerance * bnorm) break;
    apply_neg_laplacian(p, Ap);
    double pAp = 0.0;
    for (int c = 0; c < N; ++c) pAp += p[c] * Ap[c];
    if (pAp <= 0.0) break; // p fell into the constant null space
    const double alpha = rr / pAp;
    for (int c = 0; c < N; ++c) {
      psi[c] += alpha * p[c];
      r[c] -= alpha * Ap[c];
    }
    double rr_new = 0.0;
    for (double v : r) rr_new += v * v;
    const double beta = rr_new / rr;
    rr = rr_new;
    for (int c = 0; c < N; ++c) p[c] = r[c] + beta * p[c];
  }
  if (std::sqrt(rr) > params_.tolerance * bnorm) {
    std::ostringstream os;
    os << "poisson: CG did not reach tolerance " << params_.tolerance << " in "
       << params_.max_iterations << " iterations (residual " << std::sqrt(rr) / bnorm
       << ")";
    throw NumericalError(os.str());
  }

  // zero-mean normalization of the potential
  double pm = 0.0;
  for (double v : psi) pm += v;
  pm /= N;
  for (double& v : psi) v -= pm;
  return it;
}

VectorField potential_gradient(const Grid& g, const ScalarField& psi) {
  VectorField grad(g);
  const double inv2dx = 1.0 / (2.0 * g.dx);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.idx(i, j, k);
        const double vim = psi[g.idx(std::max(i - 1, 0), j, k)];
        const double vip = psi[g.idx(std::min(i + 1, g.nx - 1), j, k)];
        const double vjm = psi[g.idx(i, std::max(j - 1, 0), k)];
        const double vjp = psi[g.idx(i, std::min(j + 1, g.ny - 1), k)];
        grad.x[c] = (vip - vim) * inv2dx;
        grad.y[c] = (vjp - vjm) * inv2dx;
        if (g.dim == 3) {
          const double vkm = psi[g.idx(i, j, std::max(k - 1, 0))];
          const double vkp = psi[g.idx(i, j, std::min(k + 1, g.nz - 1))];
          grad.z[c] = (vkp - vkm) * inv2dx;
        }
      }
  return grad;
}

}  // namespace nsfp
