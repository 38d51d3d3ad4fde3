#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "spnodal/linear_solver.hpp"
#include "spnodal/nodal_domains.hpp"

using namespace spnodal;

namespace {

constexpr double kPi = std::numbers::pi;

double box_lambda1(double h, double side = 1.0) {
  // 1D stencil eigenvalue of sin(pi x / side), three axes
  const double s = std::sin(kPi * h / (2.0 * side));
  return 3.0 * 4.0 * s * s / (h * h);
}

Field box_sine(const DomainPtr& d) {
  return sample(d, [&](const auto& x) {
    return std::sin(kPi * x[0] / d->extent) * std::sin(kPi * x[1] / d->extent) * std::sin(kPi * x[2] / d->extent);
  });
}

}  // namespace

TEST(BoxGrid, CountsAndSpacing) {
  auto d3 = build_box_grid(3, 1.0);
  EXPECT_EQ(d3->node_count(), 27u);
  EXPECT_DOUBLE_EQ(d3->h, 0.25);
  auto d31 = build_box_grid(31, 1.0);
  EXPECT_EQ(d31->interior_count(), 29791u);
  EXPECT_DOUBLE_EQ(d31->h, 1.0 / 32.0);
  EXPECT_THROW(build_box_grid(2, 1.0), std::invalid_argument);
  EXPECT_THROW(build_box_grid(5, 0.0), std::invalid_argument);
}

TEST(RadialGrid, SpacingAndVolume) {
  auto d = build_radial_grid(511, 1.0);
  EXPECT_DOUBLE_EQ(d->h, 1.0 / 512.0);
  const Field one = sample(d, [](const auto&) { return 1.0; });
  EXPECT_NEAR(integrate(*d, one) / (4.0 * kPi / 3.0), 1.0, 1e-3);
  EXPECT_DOUBLE_EQ(build_radial_grid(3, 2.0)->h, 0.5);
  EXPECT_THROW(build_radial_grid(1, 1.0), std::invalid_argument);
  EXPECT_THROW(build_radial_grid(7, -1.0), std::invalid_argument);
}

TEST(BallMask, BoundaryNodesCarryNoWeight) {
  auto d = build_ball_mask_grid(15, 1.0);
  EXPECT_TRUE(d->ball_mask);
  EXPECT_LT(d->interior_count(), d->node_count());
  for (std::size_t i = 0; i < d->node_count(); ++i) {
    const auto x = d->position(i);
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    EXPECT_EQ(d->is_boundary(i), r >= 1.0 * (1.0 - 1e-12));
    if (d->is_boundary(i)) {
      EXPECT_EQ(d->quad_weights[i], 0.0);
    }
  }
  const Field one = sample(d, [](const auto&) { return 1.0; });
  EXPECT_NEAR(integrate(*d, one) / (4.0 * kPi / 3.0), 1.0, 0.05);
}

TEST(Integrate, ConstantsAndZero) {
  auto d = build_box_grid(9, 1.0);
  const Field one = sample(d, [](const auto&) { return 1.0; });
  const double nh = d->n * d->h;
  EXPECT_NEAR(integrate(*d, one), nh * nh * nh, 1e-14);
  EXPECT_EQ(integrate(*d, Field(d)), 0.0);
}

TEST(Laplacian, ZeroMapsToZero) {
  for (auto d : {build_box_grid(7, 1.0), build_radial_grid(31, 1.0)}) {
    const Field z = apply_laplacian(*d, Field(d));
    EXPECT_EQ(z.max_abs(), 0.0);
  }
}

TEST(Laplacian, BoxSineEigenRelation) {
  for (int n : {7, 15, 31}) {
    auto d = build_box_grid(n, 1.0);
    const Field u = box_sine(d);
    const Field lu = apply_laplacian(*d, u);
    const double lam = box_lambda1(d->h);
    EXPECT_LT((lu - lam * u).max_abs(), 1e-10 * lam) << "n=" << n;
  }
}

TEST(Laplacian, SymmetricOnRandomPairs) {
  std::mt19937_64 rng(7);
  for (auto d : {build_box_grid(11, 1.0), build_radial_grid(127, 1.0), build_ball_mask_grid(11, 1.0)}) {
    for (int k = 0; k < 10; ++k) {
      const Field u = random_smooth_field(d, rng), v = random_smooth_field(d, rng);
      const double a = integrate_product(apply_laplacian(*d, u), v);
      const double b = integrate_product(u, apply_laplacian(*d, v));
      EXPECT_LE(std::abs(a - b), 1e-12 * norm_h1(u) * norm_h1(v)) << d->describe();
    }
  }
}

TEST(InnerH1, SymmetryZeroAndPositivity) {
  std::mt19937_64 rng(11);
  for (auto d : {build_box_grid(9, 1.0), build_radial_grid(63, 1.0)}) {
    EXPECT_EQ(inner_h1(*d, Field(d), Field(d)), 0.0);
    for (int k = 0; k < 10; ++k) {
      const Field u = random_smooth_field(d, rng), v = random_smooth_field(d, rng);
      const double uv = inner_h1(*d, u, v), vu = inner_h1(*d, v, u);
      EXPECT_LE(std::abs(uv - vu), 1e-12 * norm_h1(u) * norm_h1(v));
      EXPECT_GT(inner_h1(*d, u, u), 0.0);
      // the H1 form is the quadrature pairing with the discrete -Laplacian
      EXPECT_NEAR(uv, integrate_product(apply_laplacian(*d, u), v), 1e-10 * norm_h1(u) * norm_h1(v));
    }
  }
}

TEST(InnerH1, PoincareAgainstSmallestEigenvalue) {
  std::mt19937_64 rng(5);
  for (auto d : {build_box_grid(9, 1.0), build_radial_grid(63, 1.0), build_ball_mask_grid(9, 1.0)}) {
    const double lam = smallest_eigenvalue(d).value;
    for (int k = 0; k < 100; ++k) {
      const Field u = random_smooth_field(d, rng);
      EXPECT_GE(inner_h1(*d, u, u), lam * integrate_product(u, u) * (1.0 - 1e-10)) << d->describe();
    }
  }
}

TEST(SmallestEigenvalue, BoxMatchesSeparableMode) {
  auto d = build_box_grid(15, 1.0);
  const auto est = smallest_eigenvalue(d);
  EXPECT_NEAR(est.value / box_lambda1(d->h), 1.0, 1e-7);
  EXPECT_NEAR(est.value / (3.0 * kPi * kPi), 1.0, 1e-2);
}

TEST(SmallestEigenvalue, DoublingSideDividesByFour) {
  const double a = smallest_eigenvalue(build_box_grid(11, 1.0)).value;
  const double b = smallest_eigenvalue(build_box_grid(11, 2.0)).value;
  EXPECT_NEAR(a / b, 4.0, 1e-7);
}

TEST(SmallestEigenvalue, RadialBallTendsToPiSquared) {
  const double e63 = smallest_eigenvalue(build_radial_grid(63, 1.0)).value;
  const double e255 = smallest_eigenvalue(build_radial_grid(255, 1.0)).value;
  EXPECT_NEAR(e255 / (kPi * kPi), 1.0, 1e-3);
  EXPECT_LT(std::abs(e255 - kPi * kPi), std::abs(e63 - kPi * kPi));
}

TEST(CgSolve, ZeroRhsAndConsistency) {
  std::mt19937_64 rng(3);
  for (auto d : {build_box_grid(15, 1.0), build_radial_grid(127, 1.0)}) {
    const auto z = solve_laplace(Field(d));
    EXPECT_EQ(z.x.max_abs(), 0.0);
    const Field y = random_smooth_field(d, rng);
    const auto sol = solve_laplace(apply_laplacian(*d, y), 1e-12);
    EXPECT_LE(sol.residual, 1e-12 * 1.0001 + 1e-15);
    EXPECT_LT((sol.x - y).max_abs(), 1e-8 * y.max_abs());
  }
}

TEST(CgSolve, RadialConstantSourceOracle) {
  std::vector<double> err;
  for (int n : {63, 127, 255}) {
    auto d = build_radial_grid(n, 1.0);
    const Field one = sample(d, [](const auto&) { return 1.0; });
    const Field phi = solve_laplace(one, 1e-12).x;
    const Field exact = sample(d, [](const auto& x) { return (1.0 - x[0] * x[0]) / 6.0; });
    err.push_back((phi - exact).max_abs() / exact.max_abs());
    EXPECT_NEAR(phi[0], 1.0 / 6.0, 1e-2);
  }
  EXPECT_LE(err[0], 2e-2);
  for (std::size_t i = 0; i + 1 < err.size(); ++i) EXPECT_NEAR(err[i] / err[i + 1], 4.0, 1.0);
}

TEST(CgSolve, IterationCapFormula) {
  auto d = build_box_grid(15, 1.0);
  EXPECT_EQ(cg_iteration_cap(*d), static_cast<int>(10.0 * std::sqrt(15.0 * 15 * 15)) + 1000);
}

TEST(SignSplit, ExactAndSymmetric) {
  std::mt19937_64 rng(13);
  auto d = build_box_grid(9, 1.0);
  const Field pos = sample(d, [](const auto& x) { return x[0] * (1 - x[0]) + 0.1; });
  EXPECT_EQ((positive_part(pos) - pos).max_abs(), 0.0);
  EXPECT_EQ(negative_part(pos).max_abs(), 0.0);
  for (int k = 0; k < 20; ++k) {
    const Field u = random_smooth_field(d, rng);
    const Field p = positive_part(u), m = negative_part(u);
    for (std::size_t i = 0; i < u.size(); ++i) {
      EXPECT_EQ(p[i] + m[i], u[i]);
      EXPECT_EQ(p[i] * m[i], 0.0);
    }
    const Field neg = -1.0 * u;
    EXPECT_EQ((positive_part(neg) + m).max_abs(), 0.0);
    EXPECT_EQ((negative_part(neg) + p).max_abs(), 0.0);
  }
}

TEST(RandomFields, SameSeedSameBits) {
  auto d = build_box_grid(9, 1.0);
  std::mt19937_64 a(99), b(99);
  const Field u = random_smooth_field(d, a), v = random_smooth_field(d, b);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ(u[i], v[i]);
}

TEST(NodalDomains, ConstructedCounts) {
  auto d = build_box_grid(15, 1.0);
  auto bump = [](const std::array<double, 3>& x, double cx, double cy, double cz) {
    const double r2 = (x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy) + (x[2] - cz) * (x[2] - cz);
    return r2 < 0.04 ? 0.04 - r2 : 0.0;
  };
  const Field one = sample(d, [&](const auto& x) { return bump(x, 0.5, 0.5, 0.5); });
  EXPECT_EQ(nodal_domains(one).count, 1);
  const Field two =
      sample(d, [&](const auto& x) { return bump(x, 0.25, 0.25, 0.25) - bump(x, 0.75, 0.75, 0.75); });
  const auto rep = nodal_domains(two);
  EXPECT_EQ(rep.count, 2);
  EXPECT_EQ(rep.signs.size(), 2u);
  EXPECT_EQ(nodal_domains(Field(d)).count, 0);
  const Field twin =
      sample(d, [&](const auto& x) { return bump(x, 0.25, 0.25, 0.25) + bump(x, 0.75, 0.75, 0.75); });
  EXPECT_EQ(nodal_domains(twin).count, 2);
  EXPECT_THROW(nodal_domains(one, -1.0), std::invalid_argument);
}

TEST(NodalDomains, RadialShells) {
  auto d = build_radial_grid(127, 1.0);
  const Field u = sample(d, [](const auto& x) { return std::cos(3.0 * kPi * x[0] / 2.0); });
  EXPECT_EQ(nodal_domains(u).count, 2);
  const Field w = sample(d, [](const auto& x) { return std::sin(3.0 * kPi * x[0]) / x[0]; });
  EXPECT_EQ(nodal_domains(w).count, 3);
}

TEST(Field, DomainMismatchThrows) {
  const Field a(build_box_grid(5, 1.0)), b(build_box_grid(7, 1.0));
  EXPECT_THROW(a + b, DomainMismatch);
}
