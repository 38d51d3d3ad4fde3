#pragma once

// Finite-difference grids for Dirichlet problems on a box, a box-embedded
// ball, or a ball reduced to radial profiles.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "spnodal/errors.hpp"

namespace spnodal {

enum class DomainKind { box3d, radial_ball };

inline const char* to_string(DomainKind k) {
  return k == DomainKind::box3d ? "box3d" : "radial_ball";
}

/**
 * Discretized domain.
 *
 * box3d: n^3 nodes of a uniform grid on [origin + h, origin + n h]^3 with
 * h = extent / (n + 1). With ball_mask set the box is [-R, R]^3 and nodes with
 * |x| >= R are flagged boundary, which gives a staircase ball.
 *
 * radial_ball: n nodes r_i = i h, h = R / (n + 1), carrying radial profiles
 * v(r) of functions on the ball of radius R. Node i owns the shell between
 * the midpoints to its neighbours; the first shell reaches the origin and the
 * last one reaches R, so the weights sum to the ball volume exactly.
 */
struct GridDomain {
  DomainKind kind = DomainKind::box3d;
  int n = 0;
  double h = 0.0;
  double extent = 0.0;
  bool ball_mask = false;
  double origin = 0.0;  // box coordinate of the (virtual) node with index -1

  std::vector<std::uint8_t> boundary_mask;
  std::vector<double> quad_weights;  // zero on boundary nodes
  std::vector<double> diagonal;      // diagonal of the discrete -Laplacian
  std::vector<double> radii;         // radial only
  std::vector<double> face_coupling; // radial only: flux coefficient between node i and i+1

  std::size_t node_count() const { return quad_weights.size(); }

  std::size_t interior_count() const {
    return static_cast<std::size_t>(
        std::count(boundary_mask.begin(), boundary_mask.end(), std::uint8_t{0}));
  }

  bool is_boundary(std::size_t i) const { return boundary_mask[i] != 0; }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * n + j) * n + i;
  }

  std::array<double, 3> position(std::size_t idx) const {
    const auto nn = static_cast<std::size_t>(n);
    const double i = static_cast<double>(idx % nn);
    const double j = static_cast<double>((idx / nn) % nn);
    const double k = static_cast<double>(idx / (nn * nn));
    return {origin + (i + 1) * h, origin + (j + 1) * h, origin + (k + 1) * h};
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << to_string(kind) << (ball_mask ? "+ball_mask" : "") << " n=" << n << " extent=" << extent
       << " h=" << h;
    return os.str();
  }
};

using DomainPtr = std::shared_ptr<const GridDomain>;

inline bool same_domain(const GridDomain& a, const GridDomain& b) {
  return &a == &b || (a.kind == b.kind && a.n == b.n && a.extent == b.extent &&
                      a.ball_mask == b.ball_mask);
}

namespace detail {

inline void require_grid_size(int n) {
  if (n < 3) throw std::invalid_argument("grid needs at least 3 nodes per axis, got " + std::to_string(n));
}

inline void require_positive_extent(double e) {
  if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("grid extent must be positive");
}

inline DomainPtr make_box(int n, double side, bool mask) {
  require_grid_size(n);
  require_positive_extent(side);
  auto d = std::make_shared<GridDomain>();
  d->kind = DomainKind::box3d;
  d->n = n;
  d->extent = side;
  d->h = side / (n + 1);
  d->ball_mask = mask;
  d->origin = mask ? -side / 2 : 0.0;
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  d->boundary_mask.assign(total, 0);
  d->quad_weights.assign(total, d->h * d->h * d->h);
  d->diagonal.assign(total, 6.0 / (d->h * d->h));
  if (mask) {
    const double radius = side / 2;
    for (std::size_t idx = 0; idx < total; ++idx) {
      const auto x = d->position(idx);
      const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
      if (r >= radius * (1.0 - 1e-12)) {
        d->boundary_mask[idx] = 1;
        d->quad_weights[idx] = 0.0;
        d->diagonal[idx] = 1.0;
      }
    }
  }
  return d;
}

/// Worker count from SPNODAL_THREADS (default 1).
inline unsigned thread_count() {
  static const unsigned count = [] {
    const char* env = std::getenv("SPNODAL_THREADS");
    if (env == nullptr) return 1u;
    const long v = std::strtol(env, nullptr, 10);
    return v > 1 ? static_cast<unsigned>(std::min(v, 64L)) : 1u;
  }();
  return count;
}

/// Runs body(begin, end) over [0, count) in contiguous chunks. Each chunk writes
/// disjoint outputs, so results do not depend on the worker count.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned workers = thread_count();
  if (workers <= 1 || count < 4096) {
    body(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Uniform box [0, side]^3 with n^3 interior unknowns and the 7-point stencil.
inline DomainPtr build_box_grid(int n, double side) { return detail::make_box(n, side, false); }

/// Box [-R, R]^3 whose nodes outside the open ball of radius R are Dirichlet nodes.
inline DomainPtr build_ball_mask_grid(int n, double radius) {
  detail::require_positive_extent(radius);
  return detail::make_box(n, 2.0 * radius, true);
}

/// Radial reduction of the ball of given radius with n profile nodes.
inline DomainPtr build_radial_grid(int n, double radius) {
  detail::require_grid_size(n);
  detail::require_positive_extent(radius);
  auto d = std::make_shared<GridDomain>();
  d->kind = DomainKind::radial_ball;
  d->n = n;
  d->extent = radius;
  d->h = radius / (n + 1);
  const double h = d->h;
  constexpr double four_pi = 4.0 * std::numbers::pi;
  d->boundary_mask.assign(n, 0);
  d->radii.resize(n);
  d->quad_weights.resize(n);
  d->face_coupling.resize(n);
  d->diagonal.resize(n);
  for (int i = 0; i < n; ++i) {
    const double r = (i + 1) * h;
    d->radii[i] = r;
    const double lo = i == 0 ? 0.0 : r - h / 2;
    const double hi = i == n - 1 ? radius : r + h / 2;
    d->quad_weights[i] = four_pi / 3.0 * (hi * hi * hi - lo * lo * lo);
    const double face = r + h / 2;
    d->face_coupling[i] = four_pi * face * face / h;
  }
  for (int i = 0; i < n; ++i) {
    const double inner = i == 0 ? 0.0 : d->face_coupling[i - 1];
    d->diagonal[i] = (inner + d->face_coupling[i]) / d->quad_weights[i];
  }
  return d;
}

/// Nodal values of a function vanishing on the boundary nodes of its domain.
class Field {
 public:
  Field() = default;

  explicit Field(DomainPtr domain) : domain_(std::move(domain)) {
    if (!domain_) throw std::invalid_argument("field needs a domain");
    values_.assign(domain_->node_count(), 0.0);
  }

  Field(DomainPtr domain, std::vector<double> values)
      : domain_(std::move(domain)), values_(std::move(values)) {
    if (!domain_) throw std::invalid_argument("field needs a domain");
    if (values_.size() != domain_->node_count())
      throw std::invalid_argument("field size " + std::to_string(values_.size()) +
                                  " does not match domain node count " +
                                  std::to_string(domain_->node_count()));
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) throw std::invalid_argument("field values must be finite");
      if (domain_->is_boundary(i)) values_[i] = 0.0;
    }
  }

  const GridDomain& domain() const { return *domain_; }
  const DomainPtr& domain_ptr() const { return domain_; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  Field& operator+=(const Field& o) {
    check(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Field& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double a, Field b) { return b *= a; }
  friend Field operator*(Field b, double a) { return b *= a; }

  /// a * x + b * y without temporaries.
  static Field combine(double a, const Field& x, double b, const Field& y) {
    x.check(y);
    Field out(x.domain_);
    for (std::size_t i = 0; i < out.values_.size(); ++i)
      out.values_[i] = a * x.values_[i] + b * y.values_[i];
    return out;
  }

 private:
  void check(const Field& o) const {
    if (!same_domain(*domain_, *o.domain_)) throw DomainMismatch();
  }

  DomainPtr domain_;
  std::vector<double> values_;
};

inline void require_same_domain(const GridDomain& d, const Field& u) {
  if (!same_domain(d, u.domain())) throw DomainMismatch();
}

/// out = (-Laplacian) u with Dirichlet elimination; out is zero on boundary nodes.
inline void apply_laplacian(const GridDomain& d, std::span<const double> u, std::span<double> out) {
  if (d.kind == DomainKind::radial_ball) {
    const int n = d.n;
    for (int i = 0; i < n; ++i) {
      const double inner = i == 0 ? 0.0 : d.face_coupling[i - 1] * (u[i] - u[i - 1]);
      const double outer = d.face_coupling[i] * (u[i] - (i + 1 < n ? u[i + 1] : 0.0));
      out[i] = (inner + outer) / d.quad_weights[i];
    }
    return;
  }
  const int n = d.n;
  const double inv_h2 = 1.0 / (d.h * d.h);
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  const bool masked = d.ball_mask;
  detail::parallel_for(static_cast<std::size_t>(n), [&](std::size_t kb, std::size_t ke) {
    for (std::size_t k = kb; k < ke; ++k) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const std::size_t idx = k * plane + static_cast<std::size_t>(j) * n + i;
          if (masked && d.boundary_mask[idx]) {
            out[idx] = 0.0;
            continue;
          }
          double s = 6.0 * u[idx];
          if (i > 0) s -= u[idx - 1];
          if (i + 1 < n) s -= u[idx + 1];
          if (j > 0) s -= u[idx - n];
          if (j + 1 < n) s -= u[idx + n];
          if (k > 0) s -= u[idx - plane];
          if (k + 1 < static_cast<std::size_t>(n)) s -= u[idx + plane];
          out[idx] = s * inv_h2;
        }
      }
    }
  });
}

inline Field apply_laplacian(const GridDomain& d, const Field& u) {
  require_same_domain(d, u);
  Field out(u.domain_ptr());
  apply_laplacian(d, u.values(), out.values());
  return out;
}

/// Quadrature sum of per-node values over interior nodes.
inline double integrate(const GridDomain& d, std::span<const double> g) {
  if (g.size() != d.node_count()) throw DomainMismatch();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += d.quad_weights[i] * g[i];
  return s;
}

inline double integrate(const GridDomain& d, const Field& g) {
  require_same_domain(d, g);
  return integrate(d, g.values());
}

/// Weighted dot product sum_i w_i a_i b_i.
inline double dot_w(const GridDomain& d, std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += d.quad_weights[i] * a[i] * b[i];
  return s;
}

/// Integral of g(u) over the domain.
template <class Fn>
double integrate_map(const Field& u, Fn&& g) {
  const auto& d = u.domain();
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (d.quad_weights[i] != 0.0) s += d.quad_weights[i] * g(u[i]);
  return s;
}

/// Integral of a * b.
inline double integrate_product(const Field& a, const Field& b) {
  if (!same_domain(a.domain(), b.domain())) throw DomainMismatch();
  return dot_w(a.domain(), a.values(), b.values());
}

/// Discrete H^1_0 inner product <(-Laplacian) u, v>, i.e. int grad u . grad v,
/// summed edge by edge as sum_e c_e (u_i - u_j)(v_i - v_j). Same value as the
/// operator form without its O(1/h^2) cancellation per node.
inline double inner_h1(const GridDomain& d, const Field& u, const Field& v) {
  require_same_domain(d, u);
  require_same_domain(d, v);
  const auto a = u.values();
  const auto b = v.values();
  double s = 0.0;
  if (d.kind == DomainKind::radial_ball) {
    const int n = d.n;
    for (int i = 0; i + 1 < n; ++i) s += d.face_coupling[i] * (a[i] - a[i + 1]) * (b[i] - b[i + 1]);
    s += d.face_coupling[n - 1] * a[n - 1] * b[n - 1];
    return s;
  }
  const int n = d.n;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  const std::size_t stride[3] = {1, static_cast<std::size_t>(n), plane};
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const std::size_t idx = static_cast<std::size_t>(k) * plane + static_cast<std::size_t>(j) * n + i;
        const int coord[3] = {i, j, k};
        for (int ax = 0; ax < 3; ++ax) {
          if (coord[ax] == 0) s += a[idx] * b[idx];
          if (coord[ax] + 1 < n) {
            const std::size_t nb = idx + stride[ax];
            s += (a[idx] - a[nb]) * (b[idx] - b[nb]);
          } else {
            s += a[idx] * b[idx];
          }
        }
      }
    }
  }
  return s * d.h;
}

inline double norm_h1(const Field& u) { return std::sqrt(std::max(0.0, inner_h1(u.domain(), u, u))); }

inline double norm_l2(const Field& u) {
  return std::sqrt(dot_w(u.domain(), u.values(), u.values()));
}

inline Field positive_part(const Field& u) {
  Field out = u;
  for (double& v : out.values()) v = std::max(v, 0.0);
  return out;
}

inline Field negative_part(const Field& u) {
  Field out = u;
  for (double& v : out.values()) v = std::min(v, 0.0);
  return out;
}

/// Nodewise square.
inline Field squared(const Field& u) {
  Field out = u;
  for (double& v : out.values()) v = v * v;
  return out;
}

/// Samples g at the node positions (box: x,y,z; radial: r in x[0]).
template <class Fn>
Field sample(const DomainPtr& d, Fn&& g) {
  std::vector<double> v(d->node_count());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (d->is_boundary(i)) continue;
    if (d->kind == DomainKind::radial_ball)
      v[i] = g(std::array<double, 3>{d->radii[i], 0.0, 0.0});
    else
      v[i] = g(d->position(i));
  }
  return Field(d, std::move(v));
}

/// Seeded Gaussian nodal values smoothed by damped Jacobi sweeps for -Laplacian u = 0.
inline Field random_smooth_field(const DomainPtr& d, std::mt19937_64& rng, int sweeps = 2) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(d->node_count());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = gauss(rng);
    v[i] = d->is_boundary(i) ? 0.0 : x;
  }
  std::vector<double> lu(v.size());
  for (int s = 0; s < sweeps; ++s) {
    apply_laplacian(*d, v, lu);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!d->is_boundary(i)) v[i] -= (2.0 / 3.0) * lu[i] / d->diagonal[i];
  }
  return Field(d, std::move(v));
}

/// Seeded combination of the lowest Dirichlet modes: sin(k pi r / R) / r with
/// k <= kmax on radial grids, products of sines with indices <= kmax on the
/// bounding box otherwise. Smooth at every resolution.
inline Field random_mode_field(const DomainPtr& d, std::mt19937_64& rng, int kmax = 3) {
  constexpr double pi = std::numbers::pi;
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (d->kind == DomainKind::radial_ball) {
    std::vector<double> coef(kmax);
    for (auto& c : coef) c = gauss(rng);
    const double R = d->extent;
    return sample(d, [&](const std::array<double, 3>& x) {
      double v = 0.0;
      for (int k = 1; k <= kmax; ++k) {
        const double a = k * pi * x[0] / R;
        v += coef[k - 1] * (a < 1e-12 ? 1.0 : std::sin(a) / a);
      }
      return v;
    });
  }
  std::vector<double> coef(static_cast<std::size_t>(kmax * kmax * kmax));
  for (auto& c : coef) c = gauss(rng);
  const double L = d->extent, o = d->origin;
  return sample(d, [&](const std::array<double, 3>& x) {
    double v = 0.0;
    std::size_t m = 0;
    for (int i = 1; i <= kmax; ++i)
      for (int j = 1; j <= kmax; ++j)
        for (int k = 1; k <= kmax; ++k)
          v += coef[m++] / (i * j * k) * std::sin(i * pi * (x[0] - o) / L) * std::sin(j * pi * (x[1] - o) / L) *
               std::sin(k * pi * (x[2] - o) / L);
    return v;
  });
}

}  // namespace spnodal
