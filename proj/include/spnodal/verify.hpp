#pragma once

// Invariant suite: every discrete identity and inequality the theory predicts,
// checked on seeded random fields, with one centralized tolerance table.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "spnodal/minimizer.hpp"

namespace spnodal {

/// Per-check tolerances. Solver-limited identities use 1e-8 relative,
/// finite-difference comparisons 1e-4, slopes and orders an absolute band.
struct VerifyTolerances {
  double hypotheses = 0.0;
  double laplacian_symmetry = 1e-10;
  double poincare = 1e-10;
  double sign_split = 0.0;
  double poisson_identity = 1e-8;
  double poisson_nonnegative = 1e-10;
  double poisson_scaling = 1e-8;
  double poisson_decomposition = 1e-8;
  double poisson_continuity = 0.3;  // |log10(ratio) - 1| for a 10x shrink of the perturbation
  double cross_symmetry = 1e-8;
  double energy_split = 1e-8;
  double nehari_additivity = 1e-10;
  double gradient_riesz = 1e-8;
  double gradient_slope = 0.2;      // |slope - 2|
  double projection_residual = 1e-10;
  double containment = 0.0;
  double uniqueness_in_box = 1e-6;
  double scalar_nodal_consistency = 1e-8;
  double jacobian_fd = 1e-4;
  double jacobian_certificate = 0.0;
  double sampled_dominance = 0.0;
  double energy_bound = 1e-8;
  double nodal_count = 0.0;
  double minimizer_stationarity = 1e-6;
};

/// Deliberate corruptions used to show that each check can fail.
enum class VerifyFault {
  none,
  loose_poisson,     // potentials solved to 1e-3 only
  signed_density,    // phi from -Laplacian phi = u instead of u^2
  skewed_laplacian,  // nonsymmetric perturbation of the operator under test
  broken_split,      // u- off by 0.1 percent
  dropped_coupling,  // E and D omitted from the fibering coefficients
  loose_projection,  // projection tolerance 1e-3
  wrong_primitive,   // F scaled by 1.01, f untouched
  scale_down,        // containment probed with c in [1/3, 1) instead of (1, 3]
  quantized_density, // u^2 rounded to multiples of 1e-2 before the Poisson solve
  dropped_potential, // Sobolev gradient computed without the phi_u u term
  off_manifold,      // certificates evaluated at 1.3 w instead of w
};

inline const char* to_string(VerifyFault f) {
  switch (f) {
    case VerifyFault::none: return "none";
    case VerifyFault::loose_poisson: return "loose_poisson";
    case VerifyFault::signed_density: return "signed_density";
    case VerifyFault::skewed_laplacian: return "skewed_laplacian";
    case VerifyFault::broken_split: return "broken_split";
    case VerifyFault::dropped_coupling: return "dropped_coupling";
    case VerifyFault::loose_projection: return "loose_projection";
    case VerifyFault::wrong_primitive: return "wrong_primitive";
    case VerifyFault::scale_down: return "scale_down";
    case VerifyFault::quantized_density: return "quantized_density";
    case VerifyFault::dropped_potential: return "dropped_potential";
    case VerifyFault::off_manifold: return "off_manifold";
  }
  return "?";
}

inline VerifyFault parse_fault(const std::string& s) {
  for (auto f : {VerifyFault::none, VerifyFault::loose_poisson, VerifyFault::signed_density,
                 VerifyFault::skewed_laplacian, VerifyFault::broken_split, VerifyFault::dropped_coupling,
                 VerifyFault::loose_projection, VerifyFault::wrong_primitive, VerifyFault::scale_down,
                 VerifyFault::quantized_density, VerifyFault::dropped_potential, VerifyFault::off_manifold})
    if (s == to_string(f)) return f;
  throw std::invalid_argument("unknown fault: " + s);
}

struct CheckResult {
  std::string name;
  std::string claim;  // the statement being tested
  std::size_t count = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

struct VerifyReport {
  std::vector<CheckResult> checks;  // sorted by name
  bool overall_pass = false;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  std::string domain;
  std::string nonlinearity;
  std::string fault = "none";

  const CheckResult& get(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw std::out_of_range("no check named " + name);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["overall_pass"] = overall_pass;
    j["seed"] = seed;
    j["n_samples"] = n_samples;
    j["domain"] = domain;
    j["nonlinearity"] = nonlinearity;
    j["fault"] = fault;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
      nlohmann::ordered_json e;
      e["name"] = c.name;
      e["claim"] = c.claim;
      e["count"] = c.count;
      e["worst"] = c.worst;
      e["tolerance"] = c.tolerance;
      e["pass"] = c.pass;
      if (!c.note.empty()) e["note"] = c.note;
      arr.push_back(std::move(e));
    }
    j["checks"] = std::move(arr);
    return j;
  }
};

struct VerifyOptions {
  VerifyFault fault = VerifyFault::none;
  VerifyTolerances tol{};
  int minimizer_max_iter = 3000;
};

namespace detail {

/// F scaled by 1.01 while f and f' stay exact.
template <Nonlinearity NL>
struct ScaledPrimitive {
  NL base;
  double factor = 1.01;
  double f(double s) const { return base.f(s); }
  double F(double s) const { return factor * base.F(s); }
  double df(double s) const { return base.df(s); }
  std::string describe() const { return base.describe() + " (F scaled)"; }
};

class CheckBuilder {
 public:
  CheckBuilder(std::string name, std::string claim, double tol) {
    r_.name = std::move(name);
    r_.claim = std::move(claim);
    r_.tolerance = tol;
  }
  void sample(double violation) {
    ++r_.count;
    if (!std::isfinite(violation)) {
      nonfinite_ = true;
      return;
    }
    r_.worst = std::max(r_.worst, violation);
  }
  void fail(const std::string& note) {
    failed_ = true;
    if (r_.note.empty()) r_.note = note;
  }
  void note(const std::string& n) {
    if (r_.note.empty()) r_.note = n;
  }
  CheckResult finish() {
    if (nonfinite_) {
      r_.worst = INFINITY;
      note("non-finite sample");
    }
    r_.pass = !failed_ && !nonfinite_ && r_.count > 0 && r_.worst <= r_.tolerance;
    if (r_.count == 0) note("no samples");
    return r_;
  }

 private:
  CheckResult r_;
  bool failed_ = false, nonfinite_ = false;
};

inline double rel(double a, double b, double scale) { return std::abs(a - b) / std::max(scale, 1e-300); }

}  // namespace detail

/**
 * Runs every invariant check on n_samples seeded random fields (and the
 * constructed cases each check needs). Failures are report entries; only a
 * zero sample count throws. Deterministic in (domain, nl, seed, n_samples,
 * options).
 */
template <Nonlinearity NL>
VerifyReport run_suite(const DomainPtr& d, const NL& nl_in, std::uint64_t seed, std::size_t n_samples,
                       const VerifyOptions& opts = {}) {
  if (n_samples == 0) throw std::invalid_argument("run_suite needs n_samples >= 1");
  if (!d) throw std::invalid_argument("run_suite needs a domain");
  const auto& T = opts.tol;
  const VerifyFault fault = opts.fault;

  VerifyReport rep;
  rep.seed = seed;
  rep.n_samples = n_samples;
  rep.domain = d->describe();
  rep.nonlinearity = nl_in.describe();
  rep.fault = to_string(fault);

  const double poisson_tol = fault == VerifyFault::loose_poisson ? 1e-3 : kDefaultPoissonTolerance;
  const double proj_tol = fault == VerifyFault::loose_projection ? 1e-3 : kDefaultProjectionTolerance;
  const PoissonSolver poisson(d, poisson_tol);

  auto run_with = [&](const auto& nl) {
    std::vector<CheckResult> out;
    auto rng_for = [&](std::uint64_t salt) { return std::mt19937_64(seed * 1000003ull + salt); };
    auto fields = [&](std::uint64_t salt, std::size_t count) {
      auto rng = rng_for(salt);
      std::vector<Field> fs;
      for (std::size_t k = 0; k < count; ++k) fs.push_back(random_smooth_field(d, rng, 2));
      return fs;
    };
    auto phi_of = [&](const Field& u) {
      if (fault == VerifyFault::signed_density) return poisson.solve_density(u).phi;
      if (fault == VerifyFault::quantized_density) {
        Field rho = squared(u);
        for (double& x : rho.values()) x = std::round(x * 1e2) / 1e2;
        return poisson.solve_density(rho).phi;
      }
      return poisson.solve_phi(u).phi;
    };
    auto neg_part = [&](const Field& u) {
      Field m = negative_part(u);
      if (fault == VerifyFault::broken_split) m *= 1.001;
      return m;
    };
    auto L = [&](const Field& u) {
      Field y = apply_laplacian(*d, u);
      if (fault == VerifyFault::skewed_laplacian) {
        for (std::size_t i = 0; i + 1 < y.size(); ++i)
          if (!d->is_boundary(i)) y[i] -= 1e-3 * d->diagonal[i] * u[i + 1];
      }
      return y;
    };
    auto coeffs = [&](const Field& v) {
      auto c = coefficients(poisson, nl, v);
      if (fault == VerifyFault::dropped_coupling) {
        c.E = 0.0;
        c.D = 0.0;
      }
      return c;
    };
    const auto samples = fields(1, n_samples);

    {  // growth and monotonicity hypotheses on f
      const auto grid = log_samples();
      const auto hyp = check_hypotheses(nl, grid);
      for (const auto& h : hyp.checks) {
        detail::CheckBuilder b("hypothesis_" + h.name, h.condition, T.hypotheses);
        b.sample(h.pass ? 0.0 : 1.0);
        if (!h.pass) b.note(h.detail);
        out.push_back(b.finish());
      }
    }
    {
      detail::CheckBuilder b("laplacian_symmetry", "<Lu, v> = <u, Lv> in the quadrature inner product",
                             T.laplacian_symmetry);
      for (std::size_t k = 0; k + 1 < samples.size() || k == 0; ++k) {
        const Field& u = samples[k];
        const Field& v = samples[(k + 1) % samples.size()];
        const double a = integrate_product(L(u), v), c = integrate_product(u, L(v));
        b.sample(detail::rel(a, c, std::sqrt(std::abs(integrate_product(L(u), u) * integrate_product(L(v), v)))));
      }
      out.push_back(b.finish());
    }
    {
      detail::CheckBuilder b("poincare", "||u||^2 >= lambda_1 int u^2 with lambda_1 the discrete first eigenvalue",
                             T.poincare);
      try {
        const auto eig = smallest_eigenvalue(d);
        const double lam = eig.value;
        auto probe = [&](const Field& u) {
          const double bound = lam * integrate_product(u, u);
          b.sample(std::max(0.0, bound - integrate_product(L(u), u)) / bound);
        };
        probe(eig.vector);  // the equality case
        auto rng = rng_for(8);
        for (std::size_t k = 0; k < samples.size(); ++k) {
          probe(samples[k]);
          probe(random_mode_field(d, rng));
        }
      } catch (const std::exception& e) {
        b.fail(e.what());
      }
      out.push_back(b.finish());
    }
    {
      detail::CheckBuilder b("sign_split", "u = u+ + u- with u+ u- = 0 nodewise", T.sign_split);
      for (const auto& u : samples) {
        const Field p = positive_part(u), m = neg_part(u);
        double worst = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
          worst = std::max({worst, std::abs(u[i] - p[i] - m[i]) / std::max(u.max_abs(), 1e-300),
                            std::abs(p[i] * m[i])});
        b.sample(worst);
      }
      out.push_back(b.finish());
    }

    // Poisson family on the shared sample set
    {
      detail::CheckBuilder ident("poisson_identity", "int |grad phi_u|^2 = int phi_u u^2", T.poisson_identity);
      detail::CheckBuilder nonneg("poisson_nonnegative", "phi_u >= 0", T.poisson_nonnegative);
      detail::CheckBuilder scal("poisson_scaling", "phi_{tu} = t^2 phi_u for t in {0.5, 2, 3}", T.poisson_scaling);
      detail::CheckBuilder decomp("poisson_decomposition", "phi_u = phi_{u+} + phi_{u-}",
                                  T.poisson_decomposition);
      detail::CheckBuilder cont("poisson_continuity",
                                "u_k -> u in H^1 implies phi_{u_k} -> phi_u (norm ladder, 10x shrink per rung)",
                                T.poisson_continuity);
      auto rng = rng_for(2);
      for (std::size_t k = 0; k < samples.size(); ++k) {
        const Field& u = samples[k];
        const Field phi = phi_of(u);
        const double grad2 = inner_h1(*d, phi, phi);
        const double plain = integrate_product(phi, squared(u));
        ident.sample(detail::rel(grad2, plain, std::abs(plain)));

        double mn = INFINITY, mx = -INFINITY;
        for (std::size_t i = 0; i < phi.size(); ++i) {
          if (d->is_boundary(i)) continue;
          mn = std::min(mn, phi[i]);
          mx = std::max(mx, phi[i]);
        }
        nonneg.sample(std::max(0.0, -mn) / std::max(std::abs(mx), 1e-300));

        for (double t : {0.5, 2.0, 3.0}) {
          const Field pt = phi_of(t * u);
          const Field diff = Field::combine(1.0, pt, -t * t, phi);
          scal.sample(diff.max_abs() / std::max(pt.max_abs(), 1e-300));
        }

        const Field split = phi_of(positive_part(u)) + phi_of(neg_part(u));
        decomp.sample((split - phi).max_abs() / std::max(phi.max_abs(), 1e-300));

        if (k < std::min<std::size_t>(samples.size(), 10)) {
          const Field v = random_smooth_field(d, rng, 2);
          double prev = -1.0;
          for (double eps : {1e-1, 1e-2, 1e-3}) {
            const Field pe = phi_of(Field::combine(1.0, u, eps, v));
            const Field diff = pe - phi;
            const double dn = norm_h1(diff);
            if (prev > 0.0) cont.sample(std::abs(std::log10(prev / dn) - 1.0));
            prev = dn;
          }
        }
      }
      out.push_back(ident.finish());
      out.push_back(nonneg.finish());
      out.push_back(scal.finish());
      out.push_back(decomp.finish());
      out.push_back(cont.finish());
    }
    {
      detail::CheckBuilder b("cross_symmetry", "int phi_a b^2 = int phi_b a^2", T.cross_symmetry);
      const auto partners = fields(3, n_samples);
      for (std::size_t k = 0; k < samples.size(); ++k) {
        const Field &a = samples[k], &c = partners[k];
        const double ab = integrate_product(phi_of(a), squared(c));
        const double ba = integrate_product(phi_of(c), squared(a));
        b.sample(detail::rel(ab, ba, std::max(std::abs(ab), std::abs(ba))));
      }
      out.push_back(b.finish());
    }

    // energy and its derivative
    {
      detail::CheckBuilder split("energy_split", "J(u) - J(u+) - J(u-) = <u+, u->_{H^1} + 1/2 int phi_{u-} (u+)^2",
                                 T.energy_split);
      detail::CheckBuilder add("nehari_additivity", "J'(u)u = J'(u)u+ + J'(u)u-", T.nehari_additivity);
      detail::CheckBuilder riesz("gradient_riesz", "<g(u), v>_{H^1} = J'(u)v for the Sobolev gradient g",
                                 T.gradient_riesz);
      const auto dirs = fields(4, n_samples);
      for (std::size_t k = 0; k < samples.size(); ++k) {
        const Field& u = samples[k];
        if (!is_sign_changing(u)) continue;
        const Field up = positive_part(u), um = neg_part(u);
        const auto eu = energy(poisson, nl, u);
        const double jp = energy(poisson, nl, up).J, jm = energy(poisson, nl, um).J;
        const auto c = coeffs(u);
        const double predicted = c.E + 0.5 * c.D;
        split.sample(detail::rel(eu.J - jp - jm, predicted, std::abs(eu.J) + eu.norm_sq));

        const Field phi = poisson.solve_phi(u).phi;
        add.sample(detail::rel(eu.nehari_res, directional(nl, u, phi, up) + directional(nl, u, phi, um),
                               eu.norm_sq + std::abs(eu.nonlocal) + std::abs(eu.nehari_res)));

        const Field& v = dirs[k];
        const Field g = h1_gradient(nl, u, fault == VerifyFault::dropped_potential ? Field(d) : phi, 1e-12);
        const double lhs = inner_h1(*d, g, v);
        const double rhs = directional(nl, u, phi, v);
        riesz.sample(detail::rel(lhs, rhs, std::sqrt(inner_h1(*d, g, g) * inner_h1(*d, v, v))));
      }
      out.push_back(split.finish());
      out.push_back(add.finish());
      out.push_back(riesz.finish());
    }
    {
      detail::CheckBuilder b("gradient_slope",
                             "central differences of J converge to J'(u)v at order 2 (eps = 1e-2, 1e-3, 1e-4)",
                             T.gradient_slope);
      // Squares of low-mode fields keep the third derivative of J along v away
      // from zero, and |v| = 8 lifts the eps^2 term above the rounding of u + eps v.
      auto rng = rng_for(5);
      for (std::size_t k = 0; k < std::min<std::size_t>(n_samples, 20); ++k) {
        const Field ru = squared(random_mode_field(d, rng)), rv = squared(random_mode_field(d, rng));
        const Field u = ru * (4.0 / std::max(ru.max_abs(), 1e-300));
        const Field v = rv * (8.0 / std::max(rv.max_abs(), 1e-300));
        const double exact = directional(poisson, nl, u, v);
        std::vector<double> errs;
        for (double eps : {1e-2, 1e-3, 1e-4}) {
          const double jp = energy(poisson, nl, Field::combine(1.0, u, eps, v)).J;
          const double jm = energy(poisson, nl, Field::combine(1.0, u, -eps, v)).J;
          errs.push_back(std::abs((jp - jm) / (2.0 * eps) - exact));
        }
        // least-squares slope of log err against log eps
        const double xs[3] = {-2.0, -3.0, -4.0};
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < 3; ++i) {
          const double y = std::log10(std::max(errs[i], 1e-300));
          sx += xs[i];
          sy += y;
          sxx += xs[i] * xs[i];
          sxy += xs[i] * y;
        }
        const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
        b.sample(std::abs(slope - 2.0));
      }
      out.push_back(b.finish());
    }

    // fibering map and projection
    std::vector<std::pair<NehariCoefficients, ProjectionResult>> projected;
    {
      detail::CheckBuilder b("projection_residual", "max |Phi(t, s)| <= tol (A+ + A-) after projection",
                             T.projection_residual);
      for (const auto& u : samples) {
        if (!is_sign_changing(u)) continue;
        try {
          const auto c_true = coefficients(poisson, nl, u);
          const auto c = coeffs(u);
          const auto p = project_nodal(c, proj_tol);
          b.sample(detail::max_abs2(phi_map(c_true, p.t, p.s)) / c_true.scale());
          projected.emplace_back(c_true, p);
        } catch (const std::exception& e) {
          b.fail(e.what());
        }
      }
      out.push_back(b.finish());
    }
    {
      detail::CheckBuilder b("containment",
                             "for w in M and v = c w with c > 1, the projection of v has (t, s) in (0, 1]^2",
                             T.containment);
      auto rng = rng_for(7);
      std::uniform_real_distribution<double> up(1.0, 3.0), down(1.0 / 3.0, 1.0);
      for (const auto& [c, p] : projected) {
        double scale = fault == VerifyFault::scale_down ? down(rng) : up(rng);
        if (scale == 1.0) scale = 3.0;
        try {
          const Field w = nodal_combination(c, p.t, p.s);
          const auto q = project_nodal(coeffs(scale * w), proj_tol);
          const double over = std::max(q.t, q.s) - 1.0;
          b.sample(q.t > 0.0 && q.s > 0.0 ? std::max(0.0, over) : 1.0);
        } catch (const std::exception& e) {
          b.fail(e.what());
        }
      }
      out.push_back(b.finish());
    }
    {
      detail::CheckBuilder b("uniqueness_in_box", "Newton from 20 random starts in the Miranda box reaches one root",
                             T.uniqueness_in_box);
      std::size_t used = 0;
      for (const auto& [c, p] : projected) {
        if (used++ >= 10) break;
        try {
          const auto box = find_miranda_box(c);
          const auto roots = multistart_roots(c, box, 20, seed + used, proj_tol);
          double spread = 0.0;
          int converged = 0;
          for (const auto& r : roots) {
            if (!r.converged) continue;
            ++converged;
            spread = std::max({spread, std::abs(r.t - p.t) / p.t, std::abs(r.s - p.s) / p.s});
          }
          if (converged == 0) b.fail("no multi-start Newton run converged");
          b.sample(spread);
        } catch (const std::exception& e) {
          b.fail(e.what());
        }
      }
      out.push_back(b.finish());
    }
    {
      detail::CheckBuilder b("scalar_nodal_consistency",
                             "with the coupling zeroed, the nodal projection splits into two scalar projections",
                             T.scalar_nodal_consistency);
      for (const auto& [c0, p] : projected) {
        auto c = c0;
        c.D = 0.0;
        c.E = 0.0;
        try {
          const auto q = project_nodal(c, proj_tol);
          const auto sp = solve_scalar(ScalarCoefficients{c.A_plus, c.B_plus, c.plus}, 1e-13);
          const auto sm = solve_scalar(ScalarCoefficients{c.A_minus, c.B_minus, c.minus}, 1e-13);
          b.sample(std::max(std::abs(q.t - sp.t) / sp.t, std::abs(q.s - sm.t) / sm.t));
        } catch (const std::exception& e) {
          b.fail(e.what());
        }
      }
      out.push_back(b.finish());
    }
    {
      detail::CheckBuilder b("jacobian_fd", "central-difference Jacobian of Phi at (1, 1) matches the closed form",
                             T.jacobian_fd);
      for (const auto& [c, p] : projected) {
        try {
          const Field w = nodal_combination(c, p.t, p.s);
          const auto cw = coefficients(poisson, nl, w);
          auto cm = coeffs(w);
          const auto jac = phi_jacobian(cm, 1.0, 1.0);
          const double det = jac[0] * jac[3] - jac[1] * jac[2];
          const double e = 1e-5;
          const auto tp = phi_map(cw, 1 + e, 1), tm = phi_map(cw, 1 - e, 1);
          const auto sp = phi_map(cw, 1, 1 + e), sm = phi_map(cw, 1, 1 - e);
          const double a = (tp[0] - tm[0]) / (2 * e), bb = (sp[0] - sm[0]) / (2 * e);
          const double cc = (tp[1] - tm[1]) / (2 * e), dd = (sp[1] - sm[1]) / (2 * e);
          const double det_fd = a * dd - bb * cc;
          b.sample(detail::rel(det_fd, det, std::abs(det)));
        } catch (const std::exception& e) {
          b.fail(e.what());
        }
      }
      out.push_back(b.finish());
    }

    // certificates on M: random projected points plus one converged minimizer
    {
      detail::CheckBuilder cert("jacobian_certificate", "G(w+-) > 2 int phi_{w-+} (w+-)^2 and det Phi'(1, 1) > 0",
                                T.jacobian_certificate);
      detail::CheckBuilder dom("sampled_dominance", "h(1, 1) is the strict max of h over a 10 x 10 grid on [0.2, 2]^2",
                               T.sampled_dominance);
      detail::CheckBuilder l2("energy_bound", "J(w) >= ||w||^2 / 4 on the Nehari set", T.energy_bound);
      detail::CheckBuilder nod("nodal_count", "a converged least-energy nodal minimizer has exactly 2 nodal domains",
                               T.nodal_count);
      detail::CheckBuilder stat("minimizer_stationarity", "||J'(w)||_{H^-1} <= tol ||w|| at the minimizer",
                                T.minimizer_stationarity);
      auto certify = [&](const Field& w_in) {
        const Field w = fault == VerifyFault::off_manifold ? 1.3 * w_in : w_in;
        const auto c = coeffs(w);
        const auto dr = sampled_dominance(c);
        const double top = std::max(std::abs(eval_h(c, 1, 1)), 1e-300);
        dom.sample(dr.margin > 0.0 ? 0.0 : std::max(-dr.margin / top, 1e-300));
        const auto e = energy(poisson, nl, w);
        l2.sample(std::max(0.0, e.norm_sq / 4.0 - e.J) / std::max(std::abs(e.J), 1e-300));
        try {
          const auto jd = jacobian_diag(coefficients(poisson, nl, w));
          const auto jac = phi_jacobian(c, 1.0, 1.0);
          const double det = jac[0] * jac[3] - jac[1] * jac[2];
          const double dom_gap = std::max(0.0, 2.0 * c.D - std::min(jd.G_plus, jd.G_minus));
          cert.sample(std::max(dom_gap / c.scale(), det > 0.0 ? 0.0 : 1.0));
        } catch (const NotOnNodalSet& ex) {
          cert.fail(ex.what());
        }
      };
      for (const auto& [c, p] : projected) {
        try {
          certify(nodal_combination(c, p.t, p.s));
        } catch (const std::exception& e) {
          cert.fail(e.what());
        }
      }
      try {
        MinimizerOptions mo;
        mo.max_iter = opts.minimizer_max_iter;
        mo.proj_tol = proj_tol;
        const auto res = minimize_nodal(poisson, nl, initial_guess(d, InitStyle::dipole, seed), mo);
        if (!res.converged()) stat.fail(std::string("minimizer ended ") + to_string(res.status));
        stat.sample(res.grad_norm / std::max(res.norm, 1e-300));
        nod.sample(std::abs(static_cast<double>(res.nodal.count) - 2.0));
        certify(res.w);
      } catch (const std::exception& e) {
        stat.fail(e.what());
        nod.fail(e.what());
        l2.fail(e.what());
      }
      out.push_back(cert.finish());
      out.push_back(dom.finish());
      out.push_back(l2.finish());
      out.push_back(nod.finish());
      out.push_back(stat.finish());
    }
    return out;
  };

  if (fault == VerifyFault::wrong_primitive)
    rep.checks = run_with(detail::ScaledPrimitive<NL>{nl_in});
  else
    rep.checks = run_with(nl_in);
  std::sort(rep.checks.begin(), rep.checks.end(),
            [](const CheckResult& a, const CheckResult& b) { return a.name < b.name; });
  rep.overall_pass = std::all_of(rep.checks.begin(), rep.checks.end(), [](const auto& c) { return c.pass; });
  return rep;
}

struct ConvergenceRow {
  int n = 0;
  double h = 0.0;
  double c0 = NAN;
  double cN = NAN;
  double poisson_error = NAN;  // max-norm relative error against a closed-form potential
  std::string error;           // solver failure for this row, if any
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::vector<double> poisson_order;  // log2(e_i / e_{i+1}) for successive rows
  std::vector<double> c0_ratio;       // |c0_i - c0_{i+1}| / |c0_{i+1} - c0_{i+2}|
  std::vector<double> cN_ratio;
};

/// Maximum relative error of the discrete potential against a closed form:
/// -Laplacian phi = 1 on radial balls, a sine mode on boxes.
inline double poisson_oracle_error(const DomainPtr& d) {
  if (d->kind == DomainKind::radial_ball) {
    const double R = d->extent;
    const Field one = sample(d, [](const auto&) { return 1.0; });
    const Field phi = solve_laplace(one, 1e-12).x;
    const Field exact = sample(d, [R](const auto& x) { return (R * R - x[0] * x[0]) / 6.0; });
    return (phi - exact).max_abs() / exact.max_abs();
  }
  if (d->ball_mask) return NAN;
  constexpr double pi = std::numbers::pi;
  const double L = d->extent, o = d->origin;
  auto mode = [&](const std::array<double, 3>& x) {
    return std::sin(pi * (x[0] - o) / L) * std::sin(pi * (x[1] - o) / L) * std::sin(pi * (x[2] - o) / L);
  };
  const Field rhs = sample(d, mode) * (3.0 * pi * pi / (L * L));
  const Field phi = solve_laplace(rhs, 1e-12).x;
  const Field exact = sample(d, mode);
  return (phi - exact).max_abs() / exact.max_abs();
}

/**
 * c0(h), cN(h) and the Poisson oracle error over a resolution ladder built by
 * make_domain(n). Failed rows keep their error message and the study goes on.
 */
template <Nonlinearity NL>
ConvergenceTable convergence_study(const std::function<DomainPtr(int)>& make_domain, const NL& nl,
                                   const std::vector<int>& ladder, InitStyle style = InitStyle::dipole,
                                   const MinimizerOptions& opts = {}) {
  if (ladder.size() < 3) throw std::invalid_argument("convergence study needs at least 3 resolutions");
  ConvergenceTable tab;
  for (int n : ladder) {
    ConvergenceRow row;
    row.n = n;
    try {
      const auto d = make_domain(n);
      row.h = d->h;
      row.poisson_error = poisson_oracle_error(d);
      const PoissonSolver poisson(d);
      const auto nodal = minimize_nodal(poisson, nl, initial_guess(d, style), opts);
      if (nodal.converged()) row.c0 = nodal.c0;
      else row.error = std::string("nodal run ") + to_string(nodal.status);
      const auto ground = minimize_ground(poisson, nl, positive_part(initial_guess(d, InitStyle::radial2)), opts);
      if (ground.converged()) row.cN = ground.c0;
      else if (row.error.empty()) row.error = std::string("ground run ") + to_string(ground.status);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    tab.rows.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < tab.rows.size(); ++i)
    tab.poisson_order.push_back(std::log2(tab.rows[i].poisson_error / tab.rows[i + 1].poisson_error));
  for (std::size_t i = 0; i + 2 < tab.rows.size(); ++i) {
    const auto& a = tab.rows[i];
    const auto& b = tab.rows[i + 1];
    const auto& c = tab.rows[i + 2];
    tab.c0_ratio.push_back(std::abs(a.c0 - b.c0) / std::abs(b.c0 - c.c0));
    tab.cN_ratio.push_back(std::abs(a.cN - b.cN) / std::abs(b.cN - c.cN));
  }
  return tab;
}

}  // namespace spnodal
