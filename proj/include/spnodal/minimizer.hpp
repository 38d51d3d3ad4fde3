#pragma once

// Projected Sobolev-gradient descent for
//   c0 = inf { J(w) : w in M }   (least-energy nodal solution)
//   cN = inf { J(u) : u in N }   (ground state, for comparison)

#include <optional>
#include <string>

#include "spnodal/nehari.hpp"
#include "spnodal/nodal_domains.hpp"

namespace spnodal {

enum class InitStyle { dipole, mode2, random_signed, radial2 };

inline const char* to_string(InitStyle s) {
  switch (s) {
    case InitStyle::dipole: return "dipole";
    case InitStyle::mode2: return "mode2";
    case InitStyle::random_signed: return "random_signed";
    case InitStyle::radial2: return "radial2";
  }
  return "?";
}

inline InitStyle parse_init_style(const std::string& s) {
  if (s == "dipole") return InitStyle::dipole;
  if (s == "mode2") return InitStyle::mode2;
  if (s == "random_signed" || s == "random") return InitStyle::random_signed;
  if (s == "radial2") return InitStyle::radial2;
  throw std::invalid_argument("unknown initial guess style: " + s);
}

/**
 * Sign-changing starting field.
 *
 * dipole: opposite Gaussian bumps (on radial grids a central bump and a
 *   negative shell, the only dipole a radial profile can hold);
 * mode2: second Dirichlet mode of the bounding box, or sin(2 pi r/R)/r on
 *   radial grids;
 * radial2: sin(2 pi r/R)/r about the centre on every grid, so box-embedded
 *   balls can be compared with the radial reduction;
 * random_signed: smoothed seeded noise minus its mean.
 */
inline Field initial_guess(const DomainPtr& d, InitStyle style, std::uint64_t seed = 42) {
  constexpr double pi = std::numbers::pi;
  const bool radial = d->kind == DomainKind::radial_ball;
  const double R = radial || d->ball_mask ? d->extent / (radial ? 1.0 : 2.0) : d->extent / 2.0;
  const double cx = radial || d->ball_mask ? 0.0 : d->extent / 2.0;  // centre coordinate
  auto radial_mode = [R](double r) {
    const double k = 2.0 * pi / R;
    return r < 1e-12 ? 1.0 : std::sin(k * r) / (k * r);
  };
  switch (style) {
    case InitStyle::dipole:
      if (radial) {
        const double w = 0.2 * R;
        return sample(d, [&](const std::array<double, 3>& x) {
          const double r = x[0];
          return std::exp(-r * r / (w * w)) - 0.5 * std::exp(-(r - 0.6 * R) * (r - 0.6 * R) / (w * w));
        });
      }
      return sample(d, [&](const std::array<double, 3>& x) {
        const double a = R / 2, w = R / 3;
        const double y2 = (x[1] - cx) * (x[1] - cx) + (x[2] - cx) * (x[2] - cx);
        const double p = (x[0] - cx - a) * (x[0] - cx - a) + y2;
        const double m = (x[0] - cx + a) * (x[0] - cx + a) + y2;
        return std::exp(-p / (w * w)) - std::exp(-m / (w * w));
      });
    case InitStyle::mode2:
      if (radial) return sample(d, [&](const std::array<double, 3>& x) { return radial_mode(x[0]); });
      return sample(d, [&](const std::array<double, 3>& x) {
        const double L = d->extent, o = d->origin;
        return std::sin(2.0 * pi * (x[0] - o) / L) * std::sin(pi * (x[1] - o) / L) * std::sin(pi * (x[2] - o) / L);
      });
    case InitStyle::radial2:
      return sample(d, [&](const std::array<double, 3>& x) {
        if (radial) return radial_mode(x[0]);
        const double r = std::sqrt((x[0] - cx) * (x[0] - cx) + (x[1] - cx) * (x[1] - cx) + (x[2] - cx) * (x[2] - cx));
        return r < R ? radial_mode(r) : 0.0;
      });
    case InitStyle::random_signed: {
      std::mt19937_64 rng(seed);
      Field u = random_smooth_field(d, rng, 8);
      double mass = 0.0, vol = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        mass += d->quad_weights[i] * u[i];
        vol += d->quad_weights[i];
      }
      for (std::size_t i = 0; i < u.size(); ++i)
        if (!d->is_boundary(i)) u[i] -= mass / vol;
      return u;
    }
  }
  throw std::invalid_argument("unknown initial guess style");
}

struct MinimizerOptions {
  double tol_grad = 1e-6;        // stop when ||g||_{H^1} <= tol_grad ||w||
  int max_iter = 3000;
  double ls_shrink = 0.5;
  double armijo = 1e-4;
  double initial_step = 1.0;
  int max_shrinks = 40;
  double proj_tol = kDefaultProjectionTolerance;
  double collapse_ratio = 1e-3;  // reject steps with min ||u+-|| < ratio ||u||
  double grad_cg_tol = 1e-12;
  double lp_exponent = 4.0;      // exponent of the int |w+-|^p floor diagnostics
};

struct IterationRecord {
  int iter = 0;
  double J = 0.0;
  double grad_norm = 0.0;
  double t = 1.0, s = 1.0;
  double norm_plus = 0.0, norm_minus = 0.0;
  double nonlocal = 0.0;  // int phi_w w^2
  double cross = 0.0;     // int phi_{w-} (w+)^2
  double lp_plus = 0.0, lp_minus = 0.0;
  double step = 0.0;      // accepted step that produced the next iterate
};

enum class RunStatus { converged, max_iter, stationary };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iter: return "max_iter";
    case RunStatus::stationary: return "stationary";
  }
  return "?";
}

struct EnergyBoundReport {
  double J = 0.0;
  double norm_sq = 0.0;
  double bound_gap = 0.0;  // 4 J(w) - ||w||^2 = int H(w) on the Nehari manifold
  double norm = 0.0, norm_plus = 0.0, norm_minus = 0.0;
  double lp_exponent = 4.0;
  double lp_plus = 0.0, lp_minus = 0.0;
  double min_norm_plus = 0.0, min_norm_minus = 0.0;
  double min_lp_plus = 0.0, min_lp_minus = 0.0;
  bool bound_holds = false;
};

struct SolveOutcome {
  Field w;
  double c0 = 0.0;  // J(w); the ground-state energy for ground runs
  double grad_norm = 0.0;
  double norm = 0.0;
  RunStatus status = RunStatus::max_iter;
  int iterations = 0;
  bool nodal_run = true;
  std::vector<IterationRecord> history;
  NodalReport nodal;
  EnergyBoundReport energy_bound;
  std::optional<JacobianDiagnostics> jacobian;
  std::optional<DominanceReport> dominance;
  std::optional<double> ground_energy;
  bool excited = false;  // converged to three or more nodal domains

  bool converged() const { return status == RunStatus::converged; }
};

/**
 * Checks J(w) >= ||w||^2 / 4 and records the norms of the sign parts and their
 * L^p integrals, including their minima over the iteration history. Throws
 * std::logic_error when the bound fails, which can only happen if w is off N.
 */
template <Nonlinearity NL>
EnergyBoundReport energy_bound_diagnostics(const PoissonSolver& poisson, const NL& nl, const SolveOutcome& out,
                                double lp_exponent = 4.0) {
  EnergyBoundReport rep;
  const auto e = energy(poisson, nl, out.w);
  rep.J = e.J;
  rep.norm_sq = e.norm_sq;
  rep.bound_gap = 4.0 * e.J - e.norm_sq;
  rep.norm = std::sqrt(e.norm_sq);
  rep.norm_plus = norm_h1(positive_part(out.w));
  rep.norm_minus = norm_h1(negative_part(out.w));
  rep.lp_exponent = lp_exponent;
  rep.lp_plus = integrate_map(positive_part(out.w), [&](double x) { return std::pow(std::abs(x), lp_exponent); });
  rep.lp_minus = integrate_map(negative_part(out.w), [&](double x) { return std::pow(std::abs(x), lp_exponent); });
  rep.min_norm_plus = rep.norm_plus;
  rep.min_norm_minus = rep.norm_minus;
  rep.min_lp_plus = rep.lp_plus;
  rep.min_lp_minus = rep.lp_minus;
  for (const auto& h : out.history) {
    rep.min_norm_plus = std::min(rep.min_norm_plus, h.norm_plus);
    rep.min_norm_minus = std::min(rep.min_norm_minus, h.norm_minus);
    rep.min_lp_plus = std::min(rep.min_lp_plus, h.lp_plus);
    rep.min_lp_minus = std::min(rep.min_lp_minus, h.lp_minus);
  }
  rep.bound_holds = e.J >= e.norm_sq / 4.0 - 1e-8 * std::abs(e.J);
  if (!rep.bound_holds)
    throw std::logic_error("J(w) < ||w||^2/4 on a Nehari point: projection is broken (gap " +
                           std::to_string(rep.bound_gap) + ")");
  return rep;
}

namespace detail {

/// Current M-point t u+ + s u- with everything the descent needs from it.
struct NodalPoint {
  NehariCoefficients coeffs;
  ProjectionResult proj;
  Field w;
  double J = 0.0;
};

template <Nonlinearity NL>
std::optional<NodalPoint> project_point(const PoissonSolver& poisson, const NL& nl, const Field& u,
                                        double tol) {
  NodalPoint p;
  try {
    p.coeffs = coefficients(poisson, nl, u);
    p.proj = project_nodal(p.coeffs, tol);
  } catch (const ConvergenceError&) {
    return std::nullopt;
  } catch (const OneSignedField&) {
    return std::nullopt;
  }
  p.w = nodal_combination(p.coeffs, p.proj.t, p.proj.s);
  p.J = eval_h(p.coeffs, p.proj.t, p.proj.s);
  return p;
}

inline IterationRecord record_of(const NodalPoint& p, int iter, double grad_norm, double lp) {
  const auto& c = p.coeffs;
  const double t = p.proj.t, s = p.proj.s;
  IterationRecord r;
  r.iter = iter;
  r.J = p.J;
  r.grad_norm = grad_norm;
  r.t = t;
  r.s = s;
  r.norm_plus = t * std::sqrt(c.A_plus);
  r.norm_minus = s * std::sqrt(c.A_minus);
  r.cross = t * t * s * s * c.D;
  r.nonlocal = std::pow(t, 4) * c.B_plus + std::pow(s, 4) * c.B_minus + 2.0 * r.cross;
  r.lp_plus = std::pow(t, lp) * integrate_map(c.v_plus, [&](double x) { return std::pow(std::abs(x), lp); });
  r.lp_minus = std::pow(s, lp) * integrate_map(c.v_minus, [&](double x) { return std::pow(std::abs(x), lp); });
  return r;
}

}  // namespace detail

/**
 * Minimizes J over M starting from a sign-changing u0.
 *
 * Each iteration projects onto M, takes the H^1 gradient g at the projected
 * point w, and backtracks on u = w - alpha g (re-projected) until the Armijo
 * condition J(P(u)) < J(w) - armijo alpha ||g||^2 holds. Steps that nearly
 * empty one sign part are shrunk without being evaluated.
 */
template <Nonlinearity NL>
SolveOutcome minimize_nodal(const PoissonSolver& poisson, const NL& nl, const Field& u0,
                            const MinimizerOptions& opts = {}) {
  if (!(opts.tol_grad > 0.0 && opts.ls_shrink > 0.0 && opts.ls_shrink < 1.0 && opts.initial_step > 0.0 &&
        opts.max_iter >= 0))
    throw std::invalid_argument("minimizer options must be positive");
  auto start = detail::project_point(poisson, nl, u0, opts.proj_tol);
  if (!start) throw OneSignedField("initial guess must change sign and admit a nodal projection");
  detail::NodalPoint cur = std::move(*start);

  SolveOutcome out;
  out.nodal_run = true;
  out.status = RunStatus::max_iter;
  for (int iter = 0;; ++iter) {
    const Field phi_w = Field::combine(cur.proj.t * cur.proj.t, cur.coeffs.phi_plus, cur.proj.s * cur.proj.s,
                                       cur.coeffs.phi_minus);
    const Field g = h1_gradient(nl, cur.w, phi_w, opts.grad_cg_tol);
    const double gnorm_sq = std::max(0.0, inner_h1(g.domain(), g, g));
    const double gnorm = std::sqrt(gnorm_sq);
    const double wnorm = norm_h1(cur.w);
    out.history.push_back(detail::record_of(cur, iter, gnorm, opts.lp_exponent));
    out.iterations = iter;
    out.grad_norm = gnorm;
    if (gnorm <= opts.tol_grad * wnorm) {
      out.status = RunStatus::converged;
      break;
    }
    if (iter >= opts.max_iter) {
      out.status = RunStatus::max_iter;
      break;
    }
    double alpha = opts.initial_step;
    std::optional<detail::NodalPoint> next;
    for (int m = 0; m <= opts.max_shrinks; ++m, alpha *= opts.ls_shrink) {
      const Field u = Field::combine(1.0, cur.w, -alpha, g);
      const double un = norm_h1(u);
      if (std::min(norm_h1(positive_part(u)), norm_h1(negative_part(u))) < opts.collapse_ratio * un) continue;
      auto cand = detail::project_point(poisson, nl, u, opts.proj_tol);
      if (cand && cand->J < cur.J - opts.armijo * alpha * gnorm_sq) {
        next = std::move(cand);
        break;
      }
    }
    if (!next) {
      out.status = RunStatus::stationary;
      break;
    }
    out.history.back().step = alpha;
    cur = std::move(*next);
  }

  out.w = cur.w;
  out.c0 = cur.J;
  out.norm = norm_h1(cur.w);
  out.nodal = nodal_domains(out.w);
  out.excited = out.nodal.count >= 3;
  out.energy_bound = energy_bound_diagnostics(poisson, nl, out, opts.lp_exponent);
  try {
    const auto c = coefficients(poisson, nl, out.w);
    out.jacobian = jacobian_diag(c);
    out.dominance = sampled_dominance(c);
  } catch (const NotOnNodalSet&) {
  } catch (const OneSignedField&) {
  }
  return out;
}

/// Descent on the Nehari manifold for a nonnegative start; iterates are kept
/// nonnegative by clipping after each step.
template <Nonlinearity NL>
SolveOutcome minimize_ground(const PoissonSolver& poisson, const NL& nl, const Field& u0,
                             const MinimizerOptions& opts = {}) {
  const double cut = kNodalThresholdFraction * u0.max_abs();
  if (!(u0.max_abs() > 0.0)) throw std::invalid_argument("ground-state start must be nonzero");
  for (std::size_t i = 0; i < u0.size(); ++i)
    if (u0[i] < -cut) throw std::invalid_argument("ground-state start must be nonnegative");

  struct Point {
    ScalarCoefficients coeffs;
    ScalarProjection proj;
    Field u, w, phi_u;
    double J = 0.0;
  };
  auto project = [&](const Field& u) -> std::optional<Point> {
    if (!(u.max_abs() > 0.0)) return std::nullopt;
    Point p;
    p.u = u;
    p.phi_u = poisson.solve_phi(u).phi;
    p.coeffs.A = inner_h1(u.domain(), u, u);
    p.coeffs.B = poisson.nonlocal_energy(u, p.phi_u);
    p.coeffs.part = scaled_part(nl, u);
    p.proj = solve_scalar(p.coeffs, opts.proj_tol);
    if (!p.proj.converged) return std::nullopt;
    const double t = p.proj.t;
    p.w = t * u;
    p.J = 0.5 * t * t * p.coeffs.A + 0.25 * std::pow(t, 4) * p.coeffs.B - p.coeffs.part.potential(t);
    return p;
  };

  auto start = project(positive_part(u0));
  if (!start) throw std::invalid_argument("ground-state start admits no Nehari projection");
  Point cur = std::move(*start);
  SolveOutcome out;
  out.nodal_run = false;
  const double lp = opts.lp_exponent;
  for (int iter = 0;; ++iter) {
    const double t = cur.proj.t;
    const Field phi_w = t * t * cur.phi_u;
    const Field g = h1_gradient(nl, cur.w, phi_w, opts.grad_cg_tol);
    const double gnorm_sq = std::max(0.0, inner_h1(g.domain(), g, g));
    const double gnorm = std::sqrt(gnorm_sq);
    IterationRecord rec;
    rec.iter = iter;
    rec.J = cur.J;
    rec.grad_norm = gnorm;
    rec.t = t;
    rec.s = 0.0;
    rec.norm_plus = t * std::sqrt(cur.coeffs.A);
    rec.nonlocal = std::pow(t, 4) * cur.coeffs.B;
    rec.lp_plus = integrate_map(cur.w, [&](double x) { return std::pow(std::abs(x), lp); });
    out.history.push_back(rec);
    out.iterations = iter;
    out.grad_norm = gnorm;
    if (gnorm <= opts.tol_grad * norm_h1(cur.w)) {
      out.status = RunStatus::converged;
      break;
    }
    if (iter >= opts.max_iter) {
      out.status = RunStatus::max_iter;
      break;
    }
    double alpha = opts.initial_step;
    std::optional<Point> next;
    for (int m = 0; m <= opts.max_shrinks; ++m, alpha *= opts.ls_shrink) {
      auto cand = project(positive_part(Field::combine(1.0, cur.w, -alpha, g)));
      if (cand && cand->J < cur.J - opts.armijo * alpha * gnorm_sq) {
        next = std::move(cand);
        break;
      }
    }
    if (!next) {
      out.status = RunStatus::stationary;
      break;
    }
    out.history.back().step = alpha;
    cur = std::move(*next);
  }
  out.w = cur.w;
  out.c0 = cur.J;
  out.ground_energy = cur.J;
  out.norm = norm_h1(cur.w);
  out.nodal = nodal_domains(out.w);
  EnergyBoundReport rep;
  const auto e = energy(poisson, nl, out.w);
  rep.J = e.J;
  rep.norm_sq = e.norm_sq;
  rep.bound_gap = 4.0 * e.J - e.norm_sq;
  rep.norm = rep.norm_plus = std::sqrt(e.norm_sq);
  rep.bound_holds = e.J >= e.norm_sq / 4.0 - 1e-8 * std::abs(e.J);
  out.energy_bound = rep;
  return out;
}

struct MultiStartOutcome {
  std::vector<SolveOutcome> runs;
  std::vector<InitStyle> styles;
  std::size_t best = 0;
  std::string warning;  // non-empty when converged runs disagree on c0
};

/// Runs minimize_nodal from several initial styles and keeps the lowest
/// converged two-domain energy.
template <Nonlinearity NL>
MultiStartOutcome minimize_nodal_multistart(const PoissonSolver& poisson, const NL& nl,
                                            const std::vector<InitStyle>& styles, std::uint64_t seed,
                                            const MinimizerOptions& opts = {}, double agree_tol = 1e-4) {
  MultiStartOutcome ms;
  ms.styles = styles;
  for (auto style : styles)
    ms.runs.push_back(minimize_nodal(poisson, nl, initial_guess(poisson.domain_ptr(), style, seed), opts));
  auto rank = [](const SolveOutcome& o) { return o.converged() && o.nodal.count == 2 ? 0 : 1; };
  for (std::size_t k = 1; k < ms.runs.size(); ++k) {
    const auto& a = ms.runs[k];
    const auto& b = ms.runs[ms.best];
    if (rank(a) < rank(b) || (rank(a) == rank(b) && a.c0 < b.c0)) ms.best = k;
  }
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : ms.runs) {
    if (rank(r) != 0) continue;
    lo = std::min(lo, r.c0);
    hi = std::max(hi, r.c0);
  }
  if (hi > lo && (hi - lo) > agree_tol * std::abs(lo))
    ms.warning = "multi-start runs reached different nodal energies; reporting the smallest";
  return ms;
}

}  // namespace spnodal
