#pragma once

// Projection of sign-changing fields onto the nodal Nehari set
//   M = { u : J'(u) u+ = J'(u) u- = 0, u+ != 0, u- != 0 }
// through the fibering map h(t, s) = J(t v+ + s v-).
//
// Along the fiber every term of J reduces to a handful of scalars. On a
// finite-difference grid the sign parts are nodally disjoint but still
// couple through the stencil, so besides the nonlocal cross term
// D = int phi_{v-} (v+)^2 the reduction carries E = <v+, v->_{H^1}, which
// is nonnegative and vanishes as h -> 0.

#include <array>
#include <functional>
#include <random>

#include "spnodal/energy.hpp"
#include "spnodal/nodal_domains.hpp"

namespace spnodal {

inline constexpr double kDefaultProjectionTolerance = 1e-10;

/// Integrals of the reaction term along the ray t -> t v of one sign part.
struct ScaledPart {
  std::function<double(double)> force;      // int f(t v) v
  std::function<double(double)> dforce;     // int f'(t v) v^2
  std::function<double(double)> potential;  // int F(t v)
};

template <Nonlinearity NL>
ScaledPart scaled_part(const NL& nl, const Field& v) {
  if constexpr (PowerFamily<NL>) {
    std::vector<PowerTerm> terms(nl.terms().begin(), nl.terms().end());
    std::vector<double> moments;
    for (const auto& term : terms)
      moments.push_back(integrate_map(v, [&](double x) { return std::pow(std::abs(x), term.exponent); }));
    auto sum = [terms, moments](auto&& g) {
      double acc = 0.0;
      for (std::size_t k = 0; k < terms.size(); ++k) acc += g(terms[k], moments[k]);
      return acc;
    };
    return ScaledPart{
        [sum](double t) {
          return sum([t](const PowerTerm& a, double m) { return a.coefficient * std::pow(t, a.exponent - 1) * m; });
        },
        [sum](double t) {
          return sum([t](const PowerTerm& a, double m) {
            return a.coefficient * (a.exponent - 1) * std::pow(t, a.exponent - 2) * m;
          });
        },
        [sum](double t) {
          return sum([t](const PowerTerm& a, double m) {
            return a.coefficient * std::pow(t, a.exponent) * m / a.exponent;
          });
        }};
  } else {
    return ScaledPart{
        [nl, v](double t) { return integrate_map(v, [&](double x) { return nl.f(t * x) * x; }); },
        [nl, v](double t) { return integrate_map(v, [&](double x) { return nl.df(t * x) * x * x; }); },
        [nl, v](double t) { return integrate_map(v, [&](double x) { return nl.F(t * x); }); }};
  }
}

/// Scalar reduction of h(t, s) = J(t v+ + s v-).
struct NehariCoefficients {
  double A_plus = 0.0, A_minus = 0.0;  // ||v+||^2, ||v-||^2
  double E = 0.0;                      // <v+, v->_{H^1}, grid coupling across the nodal surface
  double B_plus = 0.0, B_minus = 0.0;  // int phi_{v+} (v+)^2, int phi_{v-} (v-)^2
  double D = 0.0;                      // int phi_{v-} (v+)^2 = int phi_{v+} (v-)^2
  double D_from_plus = 0.0;            // int phi_{v+} (v-)^2, plain quadrature
  double D_from_minus = 0.0;           // int phi_{v-} (v+)^2, plain quadrature
  ScaledPart plus, minus;
  Field v_plus, v_minus, phi_plus, phi_minus;

  double scale() const { return A_plus + A_minus; }
};

inline bool has_sign_part(const Field& v, int sign) {
  const double cut = kNodalThresholdFraction * v.max_abs();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (sign * v[i] > cut) return true;
  return false;
}

inline bool is_sign_changing(const Field& v) { return has_sign_part(v, 1) && has_sign_part(v, -1); }

/// Two Poisson solves (for v+ and v-) plus quadratures.
template <Nonlinearity NL>
NehariCoefficients coefficients(const PoissonSolver& poisson, const NL& nl, const Field& v) {
  require_same_domain(poisson.domain(), v);
  if (!is_sign_changing(v))
    throw OneSignedField("nodal projection needs v+ != 0 and v- != 0; use project_scalar for one-signed fields");
  const auto& d = v.domain();
  NehariCoefficients c;
  c.v_plus = positive_part(v);
  c.v_minus = negative_part(v);
  c.phi_plus = poisson.solve_phi(c.v_plus).phi;
  c.phi_minus = poisson.solve_phi(c.v_minus).phi;
  c.A_plus = inner_h1(d, c.v_plus, c.v_plus);
  c.A_minus = inner_h1(d, c.v_minus, c.v_minus);
  c.E = inner_h1(d, c.v_plus, c.v_minus);
  c.B_plus = poisson.nonlocal_energy(c.v_plus, c.phi_plus);
  c.B_minus = poisson.nonlocal_energy(c.v_minus, c.phi_minus);
  const Field sq_plus = squared(c.v_plus), sq_minus = squared(c.v_minus);
  c.D_from_plus = integrate_product(c.phi_plus, sq_minus);
  c.D_from_minus = integrate_product(c.phi_minus, sq_plus);
  // symmetric, error quadratic in the solver residual
  c.D = c.D_from_plus + c.D_from_minus - inner_h1(d, c.phi_plus, c.phi_minus);
  c.plus = scaled_part(nl, c.v_plus);
  c.minus = scaled_part(nl, c.v_minus);
  return c;
}

/// Phi(t, s) = grad h(t, s) = (J'(t v+ + s v-) v+, J'(t v+ + s v-) v-).
inline std::array<double, 2> phi_map(const NehariCoefficients& c, double t, double s) {
  if (!(t > 0.0 && s > 0.0)) throw std::invalid_argument("phi_map needs t, s > 0");
  return {t * c.A_plus + s * c.E + t * t * t * c.B_plus + t * s * s * c.D - c.plus.force(t),
          s * c.A_minus + t * c.E + s * s * s * c.B_minus + t * t * s * c.D - c.minus.force(s)};
}

/// Row-major Jacobian of phi_map (the Hessian of h).
inline std::array<double, 4> phi_jacobian(const NehariCoefficients& c, double t, double s) {
  const double off = c.E + 2.0 * t * s * c.D;
  return {c.A_plus + 3.0 * t * t * c.B_plus + s * s * c.D - c.plus.dforce(t), off, off,
          c.A_minus + 3.0 * s * s * c.B_minus + t * t * c.D - c.minus.dforce(s)};
}

/// h(t, s) = J(t v+ + s v-).
inline double eval_h(const NehariCoefficients& c, double t, double s) {
  if (t < 0.0 || s < 0.0) throw std::invalid_argument("eval_h needs t, s >= 0");
  return 0.5 * t * t * c.A_plus + 0.5 * s * s * c.A_minus + t * s * c.E + 0.25 * std::pow(t, 4) * c.B_plus +
         0.25 * std::pow(s, 4) * c.B_minus + 0.5 * t * t * s * s * c.D - c.plus.potential(t) -
         c.minus.potential(s);
}

struct MirandaBox {
  double r = 1.0;
  double R = 1.0;
  int adjustments = 0;
};

namespace detail {

struct EdgeStatus {
  bool lower = true;  // Phi1 > 0 on t = r and Phi2 > 0 on s = r
  bool upper = true;  // Phi1 < 0 on t = R and Phi2 < 0 on s = R
};

inline EdgeStatus miranda_edges(const NehariCoefficients& c, double r, double R, int samples) {
  EdgeStatus st;
  for (int k = 0; k < samples; ++k) {
    const double x = r + (R - r) * k / (samples - 1);
    if (!(phi_map(c, r, x)[0] > 0.0) || !(phi_map(c, x, r)[1] > 0.0)) st.lower = false;
    if (!(phi_map(c, R, x)[0] < 0.0) || !(phi_map(c, x, R)[1] < 0.0)) st.upper = false;
  }
  return st;
}

}  // namespace detail

/// True if the sampled sign conditions on the four edges of [r, R]^2 hold.
inline bool miranda_certified(const NehariCoefficients& c, const MirandaBox& box, int samples = 33) {
  if (!(box.r > 0.0 && box.r < box.R)) return false;
  const auto st = detail::miranda_edges(c, box.r, box.R, samples);
  return st.lower && st.upper;
}

/**
 * Square [r, R]^2 on whose edges Phi points inward: Phi1 > 0 at t = r,
 * Phi1 < 0 at t = R, and likewise for Phi2 in s. Starting from r = R = 1,
 * r is halved while a lower edge fails and R doubled while an upper one fails.
 */
inline MirandaBox find_miranda_box(const NehariCoefficients& c, int samples = 33, int cap = 60) {
  MirandaBox box;
  box.r = 0.5;
  box.R = 2.0;
  for (;;) {
    const auto st = detail::miranda_edges(c, box.r, box.R, samples);
    if (st.lower && st.upper) return box;
    if (box.adjustments >= cap)
      throw ConvergenceError("no Miranda box found; the reaction term may violate its growth conditions",
                             0.0, box.adjustments);
    if (!st.lower) {
      box.r *= 0.5;
      ++box.adjustments;
    }
    if (!st.upper) {
      box.R *= 2.0;
      ++box.adjustments;
    }
  }
}

struct ProjectionResult {
  double t = 1.0;
  double s = 1.0;
  double residual = 0.0;  // max |Phi| component
  int iterations = 0;
  bool converged = false;
  bool in_unit_box = false;
  bool used_bisection = false;
};

namespace detail {

inline double max_abs2(const std::array<double, 2>& v) { return std::max(std::abs(v[0]), std::abs(v[1])); }

inline ProjectionResult finish(ProjectionResult r, double tol, double scale) {
  r.converged = r.residual <= tol * scale;
  r.in_unit_box = r.t <= 1.0 && r.s <= 1.0;
  return r;
}

}  // namespace detail

/// Damped Newton on Phi(t, s) = 0 from (t0, s0), run on the scaled map
/// (Phi_1 / t, Phi_2 / s), which has the same roots in the open quadrant but
/// stays away from the trivial zero at the origin. Converged means both the
/// scaled and the unscaled residual are below tol (A+ + A-). Stops early (not
/// converged) when a step cannot be damped into the quadrant with a smaller
/// scaled residual.
inline ProjectionResult newton_nodal(const NehariCoefficients& c, double t0, double s0,
                                     double tol = kDefaultProjectionTolerance, int max_iter = 200) {
  const double scale = c.scale();
  ProjectionResult res;
  res.t = t0;
  res.s = s0;
  auto scaled = [&](double t, double s) {
    const auto F = phi_map(c, t, s);
    return std::array<double, 2>{F[0] / t, F[1] / s};
  };
  auto done = [&](const std::array<double, 2>& G) {
    return std::max(std::abs(G[0]), std::abs(G[1])) <= tol * scale && res.residual <= tol * scale;
  };
  auto G = scaled(res.t, res.s);
  double gres = std::max(std::abs(G[0]), std::abs(G[1]));
  res.residual = detail::max_abs2(phi_map(c, res.t, res.s));
  for (int it = 0; it < max_iter; ++it) {
    if (done(G)) break;
    const auto J = phi_jacobian(c, res.t, res.s);
    const std::array<double, 4> jac{(J[0] - G[0]) / res.t, J[1] / res.t, J[2] / res.s, (J[3] - G[1]) / res.s};
    const double det = jac[0] * jac[3] - jac[1] * jac[2];
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) break;
    const double dt = -(jac[3] * G[0] - jac[1] * G[1]) / det;
    const double ds = -(-jac[2] * G[0] + jac[0] * G[1]) / det;
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k <= 30; ++k, step *= 0.5) {
      const double tn = res.t + step * dt, sn = res.s + step * ds;
      if (!(tn > 0.0 && sn > 0.0)) continue;
      const auto Gn = scaled(tn, sn);
      const double rn = std::max(std::abs(Gn[0]), std::abs(Gn[1]));
      if (rn < gres || (rn == gres && k == 0)) {
        res.t = tn;
        res.s = sn;
        G = Gn;
        gres = rn;
        res.residual = detail::max_abs2(phi_map(c, tn, sn));
        accepted = true;
        break;
      }
    }
    ++res.iterations;
    if (!accepted) break;
  }
  res = detail::finish(res, tol, scale);
  res.converged = res.converged && done(G);
  return res;
}

namespace detail {

/// Root of s -> Phi2(t, s), which is unique for fixed t > 0.
inline double fiber_root_s(const NehariCoefficients& c, double t, double lo, double hi, int max_steps) {
  for (int k = 0; k < 200 && !(phi_map(c, t, lo)[1] > 0.0); ++k) lo *= 0.5;
  for (int k = 0; k < 200 && !(phi_map(c, t, hi)[1] < 0.0); ++k) hi *= 2.0;
  for (int k = 0; k < max_steps && hi - lo > 1e-15 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (phi_map(c, t, mid)[1] > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/**
 * Projection onto M: returns (t, s) with max |Phi(t, s)| <= tol (A+ + A-).
 *
 * Damped Newton from (1, 1); if it stalls or leaves the open quadrant, the
 * Miranda box is located and the root bracketed by nested bisection (s solved
 * on each fiber t = const, then t bisected), followed by a Newton polish.
 */
inline ProjectionResult project_nodal(const NehariCoefficients& c, double tol = kDefaultProjectionTolerance) {
  auto res = newton_nodal(c, 1.0, 1.0, tol, 200);
  if (res.converged) return res;
  {
    // each sign part projected on its own, ignoring the coupling terms
    auto own = [](double A, double B, const ScaledPart& part) {
      auto g = [&](double t) { return A + t * t * B - part.force(t) / t; };
      double lo = 1.0, hi = 1.0;
      for (int k = 0; k < 200 && !(g(lo) > 0.0); ++k) lo *= 0.5;
      for (int k = 0; k < 200 && !(g(hi) < 0.0); ++k) hi *= 2.0;
      for (int k = 0; k < 200 && hi - lo > 1e-14 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    };
    auto second = newton_nodal(c, own(c.A_plus, c.B_plus, c.plus), own(c.A_minus, c.B_minus, c.minus), tol, 200);
    second.iterations += res.iterations;
    if (second.converged) return second;
    res = second;
  }

  const auto box = find_miranda_box(c);
  constexpr int kBisectionSteps = 120;
  auto psi = [&](double t) { return phi_map(c, t, detail::fiber_root_s(c, t, box.r, box.R, kBisectionSteps))[0]; };
  double lo = box.r, hi = box.R;
  for (int k = 0; k < 200 && !(psi(lo) > 0.0); ++k) lo *= 0.5;
  for (int k = 0; k < 200 && !(psi(hi) < 0.0); ++k) hi *= 2.0;
  int steps = 0;
  for (; steps < kBisectionSteps && hi - lo > 1e-15 * hi; ++steps) {
    const double mid = 0.5 * (lo + hi);
    (psi(mid) > 0.0 ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  const double s = detail::fiber_root_s(c, t, box.r, box.R, kBisectionSteps);
  auto polished = newton_nodal(c, t, s, tol, 50);
  polished.iterations += res.iterations + steps;
  polished.used_bisection = true;
  if (!polished.converged)
    throw ConvergenceError("nodal projection did not converge", polished.residual / c.scale(),
                           polished.iterations);
  return polished;
}

template <Nonlinearity NL>
ProjectionResult project_nodal(const PoissonSolver& poisson, const NL& nl, const Field& v,
                               double tol = kDefaultProjectionTolerance) {
  return project_nodal(coefficients(poisson, nl, v), tol);
}

/// t v+ + s v-
inline Field nodal_combination(const NehariCoefficients& c, double t, double s) {
  return Field::combine(t, c.v_plus, s, c.v_minus);
}

/// Newton roots from random starts inside a box; callers compare them to
/// detect multiple critical points of h.
inline std::vector<ProjectionResult> multistart_roots(const NehariCoefficients& c, const MirandaBox& box,
                                                      int starts, std::uint64_t seed,
                                                      double tol = kDefaultProjectionTolerance) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(box.r, box.R);
  std::vector<ProjectionResult> out;
  for (int k = 0; k < starts; ++k) {
    const double t0 = u(rng), s0 = u(rng);
    out.push_back(newton_nodal(c, t0, s0, tol, 200));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nehari manifold along a single ray (one-signed fields).

struct ScalarCoefficients {
  double A = 0.0;  // ||u||^2
  double B = 0.0;  // int phi_u u^2
  ScaledPart part;
};

struct ScalarProjection {
  double t = 1.0;
  double residual = 0.0;  // |J'(t u) u|
  int iterations = 0;
  bool converged = false;
};

template <Nonlinearity NL>
ScalarCoefficients scalar_coefficients(const PoissonSolver& poisson, const NL& nl, const Field& u) {
  require_same_domain(poisson.domain(), u);
  if (!(u.max_abs() > 0.0)) throw std::invalid_argument("scalar projection needs u != 0");
  ScalarCoefficients c;
  c.A = inner_h1(u.domain(), u, u);
  c.B = poisson.nonlocal_energy(u);
  c.part = scaled_part(nl, u);
  return c;
}

/**
 * Positive root of t A + t^3 B - int f(t u) u = 0 by Newton safeguarded with
 * a sign bracket. Dividing by t^3 gives a strictly decreasing function of t
 * when f(s)/s^3 increases, so the root is unique.
 */
inline ScalarProjection solve_scalar(const ScalarCoefficients& c, double tol = kDefaultProjectionTolerance,
                                     int max_iter = 200) {
  auto g = [&](double t) { return t * c.A + t * t * t * c.B - c.part.force(t); };
  auto dg = [&](double t) { return c.A + 3.0 * t * t * c.B - c.part.dforce(t); };
  double lo = 1.0, hi = 1.0;
  for (int k = 0; k < 400 && !(g(lo) > 0.0); ++k) lo *= 0.5;
  for (int k = 0; k < 400 && !(g(hi) < 0.0); ++k) hi *= 2.0;
  ScalarProjection res;
  double t = std::clamp(1.0, lo, hi);
  for (int it = 0; it < max_iter; ++it) {
    const double v = g(t);
    res.t = t;
    res.residual = std::abs(v);
    res.iterations = it;
    if (res.residual <= tol * t * c.A) {
      res.converged = true;
      return res;
    }
    (v > 0.0 ? lo : hi) = t;
    double next = t - v / dg(t);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  return res;
}

/// Scale t* > 0 with t* u on the Nehari manifold.
template <Nonlinearity NL>
ScalarProjection project_scalar(const PoissonSolver& poisson, const NL& nl, const Field& u,
                                double tol = kDefaultProjectionTolerance) {
  auto res = solve_scalar(scalar_coefficients(poisson, nl, u), tol);
  if (!res.converged) throw ConvergenceError("scalar Nehari projection did not converge", res.residual, res.iterations);
  return res;
}

// ---------------------------------------------------------------------------
// Certificates at points of M.

struct JacobianDiagnostics {
  double G_plus = 0.0;   // int [f'(w+) (w+)^2 - f(w+) w+] - 2 int phi_{w+} (w+)^2
  double G_minus = 0.0;
  double D = 0.0;
  double E = 0.0;
  double det = 0.0;            // det of the discrete Jacobian of Phi at (1, 1)
  double det_continuum = 0.0;  // G+ G- - 4 D^2, the same expression with E = 0
  double membership_residual = 0.0;  // max |Phi(1, 1)| / (A+ + A-)
  bool G_dominates = false;    // G+ > 2D and G- > 2D
  bool det_positive = false;
};

inline JacobianDiagnostics jacobian_diag(const NehariCoefficients& c, double membership_tol = 1e-8) {
  JacobianDiagnostics out;
  out.membership_residual = detail::max_abs2(phi_map(c, 1.0, 1.0)) / c.scale();
  if (out.membership_residual > membership_tol) throw NotOnNodalSet(out.membership_residual);
  out.G_plus = c.plus.dforce(1.0) - c.plus.force(1.0) - 2.0 * c.B_plus;
  out.G_minus = c.minus.dforce(1.0) - c.minus.force(1.0) - 2.0 * c.B_minus;
  out.D = c.D;
  out.E = c.E;
  const auto jac = phi_jacobian(c, 1.0, 1.0);
  out.det = jac[0] * jac[3] - jac[1] * jac[2];
  out.det_continuum = out.G_plus * out.G_minus - 4.0 * c.D * c.D;
  out.G_dominates = out.G_plus > 2.0 * c.D && out.G_minus > 2.0 * c.D;
  out.det_positive = out.det > 0.0;
  return out;
}

template <Nonlinearity NL>
JacobianDiagnostics jacobian_diag(const PoissonSolver& poisson, const NL& nl, const Field& w,
                                  double membership_tol = 1e-8) {
  return jacobian_diag(coefficients(poisson, nl, w), membership_tol);
}

struct DominanceReport {
  double margin = 0.0;  // min over samples of h(1,1) - h(t,s)
  double worst_t = 0.0, worst_s = 0.0;
  int samples = 0;
};

/// h(1,1) - h(t,s) over the count x count grid on [lo, hi]^2 without (1,1).
inline DominanceReport sampled_dominance(const NehariCoefficients& c, double lo = 0.2, double hi = 2.0,
                                         int count = 10) {
  DominanceReport rep;
  rep.margin = INFINITY;
  const double top = eval_h(c, 1.0, 1.0);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < count; ++j) {
      const double t = lo + (hi - lo) * i / (count - 1);
      const double s = lo + (hi - lo) * j / (count - 1);
      if (std::abs(t - 1.0) < 1e-12 && std::abs(s - 1.0) < 1e-12) continue;
      const double m = top - eval_h(c, t, s);
      ++rep.samples;
      if (m < rep.margin) {
        rep.margin = m;
        rep.worst_t = t;
        rep.worst_s = s;
      }
    }
  }
  return rep;
}

}  // namespace spnodal
