#pragma once

// J(u) = 1/2 ||u||^2 + 1/4 int phi_u u^2 - int F(u) and its derivative.

#include "spnodal/nonlinearity.hpp"
#include "spnodal/poisson.hpp"

namespace spnodal {

struct EnergyReport {
  double J = 0.0;
  double norm_sq = 0.0;    // ||u||^2 = int |grad u|^2
  double nonlocal = 0.0;   // int phi_u u^2
  double potential = 0.0;  // int F(u)
  double nehari_res = 0.0;       // J'(u) u
  double split_res_plus = 0.0;   // J'(u) u+
  double split_res_minus = 0.0;  // J'(u) u-
};

/// Nodewise f(u).
template <Nonlinearity NL>
Field apply_reaction(const NL& nl, const Field& u) {
  Field out = u;
  for (double& v : out.values()) v = nl.f(v);
  return out;
}

/// J'(u) v for a precomputed phi_u.
template <Nonlinearity NL>
double directional(const NL& nl, const Field& u, const Field& phi_u, const Field& v) {
  const auto& d = u.domain();
  double local = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    local += d.quad_weights[i] * (phi_u[i] * u[i] - nl.f(u[i])) * v[i];
  return inner_h1(d, u, v) + local;
}

/// J'(u) v = int grad u . grad v + int phi_u u v - int f(u) v.
template <Nonlinearity NL>
double directional(const PoissonSolver& poisson, const NL& nl, const Field& u, const Field& v) {
  require_same_domain(poisson.domain(), u);
  require_same_domain(poisson.domain(), v);
  return directional(nl, u, poisson.solve_phi(u).phi, v);
}

template <Nonlinearity NL>
EnergyReport energy(const PoissonSolver& poisson, const NL& nl, const Field& u) {
  require_same_domain(poisson.domain(), u);
  const auto& d = u.domain();
  const Field phi = poisson.solve_phi(u).phi;
  EnergyReport rep;
  rep.norm_sq = inner_h1(d, u, u);
  rep.nonlocal = poisson.nonlocal_energy(u, phi);
  rep.potential = integrate_map(u, [&](double s) { return nl.F(s); });
  rep.J = 0.5 * rep.norm_sq + 0.25 * rep.nonlocal - rep.potential;
  rep.split_res_plus = directional(nl, u, phi, positive_part(u));
  rep.split_res_minus = directional(nl, u, phi, negative_part(u));
  rep.nehari_res = directional(nl, u, phi, u);
  return rep;
}

/// Riesz representative g of J'(u) in the H^1_0 inner product:
/// g = u + (-Laplacian)^{-1} (phi_u u - f(u)).
template <Nonlinearity NL>
Field h1_gradient(const NL& nl, const Field& u, const Field& phi_u, double tol) {
  Field rhs(u.domain_ptr());
  for (std::size_t i = 0; i < u.size(); ++i) rhs[i] = phi_u[i] * u[i] - nl.f(u[i]);
  Field g = solve_laplace(rhs, tol).x;
  g += u;
  return g;
}

template <Nonlinearity NL>
Field h1_gradient(const PoissonSolver& poisson, const NL& nl, const Field& u, double tol = 1e-12) {
  require_same_domain(poisson.domain(), u);
  return h1_gradient(nl, u, poisson.solve_phi(u).phi, tol);
}

}  // namespace spnodal
