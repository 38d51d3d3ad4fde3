#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <vector>

#include "spnodal/errors.hpp"
#include "spnodal/grid.hpp"

namespace spnodal {

inline constexpr double kDefaultCgTolerance = 1e-10;

/// Operator that is symmetric positive definite in the quadrature inner product.
template <class Op>
concept SpdOperator = requires(const Op& op, std::span<const double> x, std::span<double> y) {
  op.apply(x, y);
  { op.diagonal() } -> std::convertible_to<std::span<const double>>;
};

/// The discrete -Laplacian of a domain as an SpdOperator.
struct LaplacianOperator {
  const GridDomain* domain;
  void apply(std::span<const double> x, std::span<double> y) const { apply_laplacian(*domain, x, y); }
  std::span<const double> diagonal() const { return domain->diagonal; }
};

struct CgSolution {
  Field x;
  double residual = 0.0;  // ||A x - b|| / ||b|| in the quadrature norm
  int iterations = 0;
};

inline int cg_iteration_cap(const GridDomain& d) {
  return static_cast<int>(10.0 * std::sqrt(static_cast<double>(d.interior_count()))) + 1000;
}

/**
 * Jacobi-preconditioned conjugate gradients in the quadrature inner product,
 * started from zero. Stops when the relative residual drops below tol, or
 * below the rounding floor 4 eps ||A|| ||x|| / ||b|| when tol is smaller than
 * that, and throws ConvergenceError at the iteration cap. The returned
 * residual is always the true one.
 */
template <SpdOperator Op>
CgSolution cg_solve(const GridDomain& d, const Op& op, const Field& rhs, double tol) {
  require_same_domain(d, rhs);
  if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("cg tolerance must lie in (0, 1)");
  const std::size_t n = rhs.size();
  CgSolution sol{Field(rhs.domain_ptr()), 0.0, 0};
  const double bnorm = std::sqrt(dot_w(d, rhs.values(), rhs.values()));
  if (bnorm == 0.0) return sol;

  const auto diag = op.diagonal();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  double diag_max = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d.quad_weights[i] > 0.0) diag_max = std::max(diag_max, diag[i]);
  auto x = sol.x.values();
  std::vector<double> r(rhs.values().begin(), rhs.values().end());
  std::vector<double> z(n), p(n), ap(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = dot_w(d, r, z);
  const int cap = cg_iteration_cap(d);
  double rel = 1.0;
  for (int it = 1; it <= cap; ++it) {
    op.apply(p, ap);
    const double pap = dot_w(d, p, ap);
    if (!(pap > 0.0)) throw ConvergenceError("cg: operator is not positive definite", rel, it);
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    rel = std::sqrt(dot_w(d, r, r)) / bnorm;
    sol.iterations = it;
    // below eps * ||A|| ||x|| / ||b|| the residual is rounding noise
    const double floor = 4.0 * eps * diag_max * std::sqrt(dot_w(d, x, x)) / bnorm;
    if (rel <= std::max(tol, floor)) {
      // recurrence residual drifts from the true one; confirm before returning
      op.apply(x, ap);
      for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
      rel = std::sqrt(dot_w(d, r, r)) / bnorm;
      if (rel <= std::max(tol, floor)) {
        sol.residual = rel;
        return sol;
      }
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    const double rz_new = dot_w(d, r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw ConvergenceError("cg: iteration cap exceeded", rel, cap);
}

/// Solves (-Laplacian) x = rhs with Dirichlet boundary.
inline CgSolution solve_laplace(const Field& rhs, double tol = kDefaultCgTolerance) {
  const auto& d = rhs.domain();
  return cg_solve(d, LaplacianOperator{&d}, rhs, tol);
}

struct EigenEstimate {
  double value = 0.0;
  double residual = 0.0;  // ||L x - value x|| / (value ||x||)
  int iterations = 0;
  Field vector;
};

/// Smallest Dirichlet eigenvalue of -Laplacian by inverse power iteration.
inline EigenEstimate smallest_eigenvalue(const DomainPtr& d, double rel_tol = 1e-8, int max_iter = 500) {
  Field x(d);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = d->is_boundary(i) ? 0.0 : 1.0;
  x *= 1.0 / norm_l2(x);
  EigenEstimate est;
  std::vector<double> lx(x.size());
  for (int it = 1; it <= max_iter; ++it) {
    Field y = solve_laplace(x, 1e-13).x;
    x = y * (1.0 / norm_l2(y));
    apply_laplacian(*d, x.values(), lx);
    const double lambda = dot_w(*d, lx, x.values());
    for (std::size_t i = 0; i < lx.size(); ++i) lx[i] -= lambda * x[i];
    const double res = std::sqrt(dot_w(*d, lx, lx)) / lambda;
    est = EigenEstimate{lambda, res, it, x};
    if (res <= rel_tol) return est;
  }
  throw ConvergenceError("inverse iteration did not converge", est.residual, max_iter);
}

}  // namespace spnodal
