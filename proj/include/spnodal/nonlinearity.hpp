#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spnodal {

/// Reaction term f with primitive F(s) = int_0^s f and derivative f'.
template <class NL>
concept Nonlinearity = std::copy_constructible<NL> && requires(const NL& nl, double s) {
  { nl.f(s) } -> std::convertible_to<double>;
  { nl.F(s) } -> std::convertible_to<double>;
  { nl.df(s) } -> std::convertible_to<double>;
  { nl.describe() } -> std::convertible_to<std::string>;
};

/// c * |s|^(p-2) s
struct PowerTerm {
  double coefficient;
  double exponent;
};

/// Nonlinearities that are finite sums of odd power terms. Integrals along a
/// ray t -> t v then reduce to precomputed moments int |v|^p.
template <class NL>
concept PowerFamily = Nonlinearity<NL> && requires(const NL& nl) {
  { nl.terms() } -> std::convertible_to<std::span<const PowerTerm>>;
};

/**
 * f(s) = lambda |s|^(p-2) s + mu |s|^(q-2) s.
 *
 * The checked factories require exponents in (4, 6), which is the range where
 * f(s)/s^3 increases in |s| and f stays subcritical.
 */
class PowerNonlinearity {
 public:
  enum class Form { pure_power, two_power };

  static PowerNonlinearity pure(double lambda, double p) {
    validate_coefficient(lambda, "lambda");
    validate_exponent(p, "p");
    return PowerNonlinearity(Form::pure_power, {{lambda, p}});
  }

  static PowerNonlinearity two(double lambda, double p, double mu, double q) {
    validate_coefficient(lambda, "lambda");
    validate_exponent(p, "p");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be nonnegative");
    validate_exponent(q, "q");
    if (mu == 0.0) return pure(lambda, p);
    return PowerNonlinearity(Form::two_power, {{lambda, p}, {mu, q}});
  }

  /// No range checks. Used to feed deliberately invalid reaction terms to the
  /// hypothesis checks and the verification suite.
  static PowerNonlinearity unchecked(double lambda, double p, double mu = 0.0, double q = 5.0) {
    if (mu == 0.0) return PowerNonlinearity(Form::pure_power, {{lambda, p}});
    return PowerNonlinearity(Form::two_power, {{lambda, p}, {mu, q}});
  }

  Form form() const { return form_; }
  std::span<const PowerTerm> terms() const { return terms_; }
  double lambda() const { return terms_[0].coefficient; }
  double p() const { return terms_[0].exponent; }

  double f(double s) const {
    double v = 0.0;
    const double a = std::abs(s);
    for (const auto& t : terms_) v += t.coefficient * std::pow(a, t.exponent - 2.0) * s;
    return v;
  }

  double F(double s) const {
    double v = 0.0;
    const double a = std::abs(s);
    for (const auto& t : terms_) v += t.coefficient * std::pow(a, t.exponent) / t.exponent;
    return v;
  }

  double df(double s) const {
    double v = 0.0;
    const double a = std::abs(s);
    for (const auto& t : terms_) v += t.coefficient * (t.exponent - 1.0) * std::pow(a, t.exponent - 2.0);
    return v;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << (form_ == Form::pure_power ? "pure_power" : "two_power") << " lambda=" << terms_[0].coefficient
       << " p=" << terms_[0].exponent;
    if (terms_.size() > 1) os << " mu=" << terms_[1].coefficient << " q=" << terms_[1].exponent;
    return os.str();
  }

 private:
  PowerNonlinearity(Form form, std::vector<PowerTerm> terms) : form_(form), terms_(std::move(terms)) {}

  static void validate_coefficient(double c, const char* name) {
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument(std::string(name) + " must be positive");
  }
  static void validate_exponent(double e, const char* name) {
    if (!(e > 4.0 && e < 6.0))
      throw std::invalid_argument(std::string(name) + " must lie in (4, 6), got " + std::to_string(e));
  }

  Form form_;
  std::vector<PowerTerm> terms_;
};

/// Arbitrary reaction term given by callables. Nehari reductions for it fall
/// back to quadrature.
struct FunctionNonlinearity {
  std::function<double(double)> f_fn, F_fn, df_fn;
  std::string name = "function";

  double f(double s) const { return f_fn(s); }
  double F(double s) const { return F_fn(s); }
  double df(double s) const { return df_fn(s); }
  std::string describe() const { return name; }
};

/// H(s) = s f(s) - 4 F(s)
template <Nonlinearity NL>
double quartic_excess(const NL& nl, double s) {
  return s * nl.f(s) - 4.0 * nl.F(s);
}

struct HypothesisCheck {
  std::string name;
  std::string condition;
  bool pass = true;
  double worst_sample = 0.0;  // sample where the condition failed first (or 0)
  std::string detail;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  const HypothesisCheck& get(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw std::out_of_range("no hypothesis check named " + name);
  }
};

/// Log-spaced magnitudes lo..hi with the given density per decade, both signs.
inline std::vector<double> log_samples(double lo = 1e-6, double hi = 1e3, int per_decade = 8) {
  std::vector<double> s;
  const double a = std::log10(lo), b = std::log10(hi);
  const int count = static_cast<int>(std::round((b - a) * per_decade));
  for (int i = 0; i <= count; ++i) {
    const double v = std::pow(10.0, a + (b - a) * i / count);
    s.push_back(v);
    s.push_back(-v);
  }
  return s;
}

/**
 * Sampled checks of the growth and monotonicity hypotheses on f.
 *
 * Limits cannot be evaluated on finitely many points; they are checked as
 * strict monotone trends: f(s)/s must shrink as |s| decreases below 1,
 * f(s)/s^5 must shrink and F(s)/s^4 must grow as |s| increases beyond 1.
 */
template <Nonlinearity NL>
HypothesisReport check_hypotheses(const NL& nl, std::span<const double> s_grid) {
  std::vector<double> pos;
  for (double s : s_grid)
    if (s != 0.0) pos.push_back(std::abs(s));
  std::sort(pos.begin(), pos.end());
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  if (pos.size() < 3) throw std::invalid_argument("hypothesis check needs at least 3 distinct magnitudes");

  HypothesisReport rep;
  // g(sign * m) must move strictly in direction `dir` as m increases over [lo, hi].
  auto trend = [&](const std::string& name, const std::string& cond, auto&& g, double lo, double hi, int dir) {
    HypothesisCheck c{name, cond, true, 0.0, ""};
    for (double sign : {1.0, -1.0}) {
      double prev = 0.0;
      bool first = true;
      for (double m : pos) {
        if (m < lo || m > hi) continue;
        const double v = g(sign * m);
        if (!first && !(dir * (v - prev) > 0.0) && c.pass) {
          c.pass = false;
          c.worst_sample = sign * m;
          c.detail = "not strictly monotone at s=" + std::to_string(sign * m);
        }
        prev = v;
        first = false;
      }
    }
    rep.checks.push_back(c);
  };

  trend("f1", "f(s)/s -> 0 as s -> 0", [&](double s) { return std::abs(nl.f(s) / s); }, 0.0, 1.0, +1);
  {
    auto& c = rep.checks.back();
    const double small = pos.front();
    const double at_small = std::abs(nl.f(small) / small);
    const double at_one = std::abs(nl.f(1.0));
    if (c.pass && !(at_small <= 1e-3 * std::max(at_one, 1e-300))) {
      c.pass = false;
      c.worst_sample = small;
      c.detail = "f(s)/s not small near 0";
    }
  }
  trend("f2", "f(s)/s^5 -> 0 as |s| -> inf",
        [&](double s) { return std::abs(nl.f(s) / std::pow(s, 5)); }, 1.0, INFINITY, -1);
  trend("f3", "F(s)/s^4 -> inf as s -> inf", [&](double s) { return nl.F(s) / std::pow(s, 4); }, 1.0,
        INFINITY, +1);
  trend("f4", "f(s)/s^3 increasing in |s| > 0", [&](double s) { return nl.f(s) / (s * s * s); }, 0.0, INFINITY,
        +1);

  {
    HypothesisCheck c{"H_nonnegative", "H(s) = s f(s) - 4 F(s) >= 0", true, 0.0, ""};
    for (double s : s_grid) {
      if (quartic_excess(nl, s) < 0.0) {
        c.pass = false;
        c.worst_sample = s;
        c.detail = "H(s) < 0 at s=" + std::to_string(s);
        break;
      }
    }
    rep.checks.push_back(c);
  }
  trend("H_increasing", "H increasing in |s|", [&](double s) { return quartic_excess(nl, s); }, 0.0, INFINITY,
        +1);
  {
    HypothesisCheck c{"sHprime_positive", "s^2 f'(s) - 3 s f(s) > 0 for s != 0", true, 0.0, ""};
    for (double s : s_grid) {
      if (s == 0.0) continue;
      if (!(s * s * nl.df(s) - 3.0 * s * nl.f(s) > 0.0)) {
        c.pass = false;
        c.worst_sample = s;
        c.detail = "s H'(s) <= 0 at s=" + std::to_string(s);
        break;
      }
    }
    rep.checks.push_back(c);
  }
  return rep;
}

}  // namespace spnodal
