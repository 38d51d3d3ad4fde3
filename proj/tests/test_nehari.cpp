#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "spnodal/minimizer.hpp"

using namespace spnodal;

namespace {

constexpr double kPi = std::numbers::pi;

const PowerNonlinearity kQuintic = PowerNonlinearity::pure(1.0, 5.0);

ScaledPart power_part(double moment, double p) {
  return ScaledPart{[=](double t) { return moment * std::pow(t, p - 1); },
                    [=](double t) { return moment * (p - 1) * std::pow(t, p - 2); },
                    [=](double t) { return moment * std::pow(t, p) / p; }};
}

/// A point of M obtained by projecting a random sign-changing field.
Field nehari_point(const PoissonSolver& ps, std::mt19937_64& rng) {
  const Field v = 4.0 * random_smooth_field(ps.domain_ptr(), rng);
  const auto c = coefficients(ps, kQuintic, v);
  const auto pr = project_nodal(c);
  EXPECT_TRUE(pr.converged);
  return nodal_combination(c, pr.t, pr.s);
}

}  // namespace

TEST(Coefficients, OddFieldHasMirroredParts) {
  auto d = build_box_grid(15, 1.0);
  const PoissonSolver ps(d);
  const Field v = sample(d, [](const auto& x) {
    return std::sin(2 * kPi * x[0]) * std::sin(kPi * x[1]) * std::sin(kPi * x[2]);
  });
  const auto c = coefficients(ps, kQuintic, v);
  EXPECT_NEAR(c.A_plus / c.A_minus, 1.0, 1e-10);
  EXPECT_NEAR(c.B_plus / c.B_minus, 1.0, 1e-10);
  EXPECT_NEAR(c.plus.force(1.3) / c.minus.force(1.3), 1.0, 1e-10);
}

TEST(Coefficients, CrossTermSymmetry) {
  std::mt19937_64 rng(8);
  for (auto d : {build_box_grid(15, 1.0), build_radial_grid(255, 1.0)}) {
    const PoissonSolver ps(d);
    for (int k = 0; k < 10; ++k) {
      const auto c = coefficients(ps, kQuintic, random_smooth_field(d, rng));
      EXPECT_GE(c.D, 0.0);
      EXPECT_NEAR(c.D_from_plus, c.D_from_minus, 1e-8 * std::max(c.D_from_plus, c.D_from_minus));
      EXPECT_NEAR(c.D, c.D_from_plus, 1e-8 * c.D_from_plus);
      EXPECT_GT(c.A_plus, 0.0);
      EXPECT_GT(c.A_minus, 0.0);
    }
  }
}

TEST(Coefficients, OneSignedFieldRejected) {
  auto d = build_radial_grid(63, 1.0);
  const PoissonSolver ps(d);
  const Field u = sample(d, [](const auto& x) { return 1.0 - x[0] * x[0]; });
  EXPECT_THROW(coefficients(ps, kQuintic, u), OneSignedField);
  EXPECT_THROW(coefficients(ps, kQuintic, -1.0 * u), OneSignedField);
}

TEST(Coefficients, QuadratureFallbackMatchesPowerMoments) {
  std::mt19937_64 rng(9);
  auto d = build_radial_grid(127, 1.0);
  const PoissonSolver ps(d);
  const FunctionNonlinearity generic{[](double s) { return std::pow(std::abs(s), 3) * s; },
                                     [](double s) { return std::pow(std::abs(s), 5) / 5.0; },
                                     [](double s) { return 4.0 * std::pow(std::abs(s), 3); }};
  const Field v = random_smooth_field(d, rng);
  const auto a = coefficients(ps, kQuintic, v);
  const auto b = coefficients(ps, generic, v);
  for (double t : {0.3, 1.0, 2.5}) {
    EXPECT_NEAR(a.plus.force(t) / b.plus.force(t), 1.0, 1e-12);
    EXPECT_NEAR(a.minus.dforce(t) / b.minus.dforce(t), 1.0, 1e-12);
    EXPECT_NEAR(a.plus.potential(t) / b.plus.potential(t), 1.0, 1e-12);
  }
  const auto pa = project_nodal(a), pb = project_nodal(b);
  EXPECT_NEAR(pa.t, pb.t, 1e-9);
  EXPECT_NEAR(pa.s, pb.s, 1e-9);
}

TEST(PhiMap, VanishesOnMAndPointsInward) {
  std::mt19937_64 rng(10);
  auto d = build_radial_grid(255, 1.0);
  const PoissonSolver ps(d);
  const Field w = nehari_point(ps, rng);
  const auto c = coefficients(ps, kQuintic, w);
  const auto phi = phi_map(c, 1.0, 1.0);
  EXPECT_LE(std::max(std::abs(phi[0]), std::abs(phi[1])), 1e-9 * c.scale());
  for (double s : {0.5, 1.0, 2.0}) {
    EXPECT_GT(phi_map(c, 1e-4, s)[0], 0.0);
    EXPECT_LT(phi_map(c, 1e3, s)[0], 0.0);
    EXPECT_GT(phi_map(c, s, 1e-4)[1], 0.0);
    EXPECT_LT(phi_map(c, s, 1e3)[1], 0.0);
  }
  EXPECT_THROW(phi_map(c, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(phi_map(c, 1.0, -1.0), std::invalid_argument);
}

TEST(FiberingMap, MatchesDirectEnergy) {
  std::mt19937_64 rng(11);
  for (auto d : {build_radial_grid(255, 1.0), build_box_grid(11, 1.0)}) {
    const PoissonSolver ps(d);
    const Field v = 3.0 * random_smooth_field(d, rng);
    const auto c = coefficients(ps, kQuintic, v);
    EXPECT_EQ(eval_h(c, 0.0, 0.0), 0.0);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int k = 0; k < 20; ++k) {
      const double t = u(rng), s = u(rng);
      const double direct = energy(ps, kQuintic, nodal_combination(c, t, s)).J;
      const double scale = 0.5 * (t * t * c.A_plus + s * s * c.A_minus);
      EXPECT_NEAR(eval_h(c, t, s), direct, 1e-10 * std::max(std::abs(direct), scale));
    }
  }
}

TEST(FiberingMap, StrictMaximumAtOneOne) {
  std::mt19937_64 rng(12);
  auto d = build_radial_grid(255, 1.0);
  const PoissonSolver ps(d);
  for (int k = 0; k < 5; ++k) {
    const auto c = coefficients(ps, kQuintic, nehari_point(ps, rng));
    const double top = eval_h(c, 1.0, 1.0);
    for (int i = 1; i <= 10; ++i)
      for (int j = 1; j <= 10; ++j) {
        if (i == 5 && j == 5) continue;
        EXPECT_LT(eval_h(c, 0.2 * i, 0.2 * j), top);
      }
    const auto rep = sampled_dominance(c);
    EXPECT_GT(rep.margin, 0.0);
    EXPECT_EQ(rep.samples, 99);
  }
}

TEST(MirandaBox, CertifiedAndContainsOneOneOnM) {
  std::mt19937_64 rng(13);
  auto d = build_radial_grid(255, 1.0);
  const PoissonSolver ps(d);
  const auto c = coefficients(ps, kQuintic, random_smooth_field(d, rng));
  const auto box = find_miranda_box(c);
  EXPECT_LE(box.r, 1.0);
  EXPECT_GE(box.R, 1.0);
  EXPECT_TRUE(miranda_certified(c, box));
  const auto cw = coefficients(ps, kQuintic, nehari_point(ps, rng));
  const auto bw = find_miranda_box(cw);
  EXPECT_LT(bw.r, 1.0);
  EXPECT_GT(bw.R, 1.0);
}

TEST(MirandaBox, GrowthViolationHitsCap) {
  std::mt19937_64 rng(14);
  auto d = build_radial_grid(63, 1.0);
  const PoissonSolver ps(d);
  // quadratic-times-s reaction never beats the quartic nonlocal term
  const auto c = coefficients(ps, PowerNonlinearity::unchecked(1.0, 3.0), random_smooth_field(d, rng));
  EXPECT_THROW(find_miranda_box(c, 33, 20), ConvergenceError);
}

TEST(ProjectNodal, FixedPointScaleUpAndResidual) {
  std::mt19937_64 rng(15);
  for (auto d : {build_radial_grid(255, 1.0), build_box_grid(15, 1.0)}) {
    const PoissonSolver ps(d);
    const Field w = nehari_point(ps, rng);
    const auto at_w = project_nodal(ps, kQuintic, w);
    EXPECT_NEAR(at_w.t, 1.0, 1e-8);
    EXPECT_NEAR(at_w.s, 1.0, 1e-8);
    const auto c2 = coefficients(ps, kQuintic, 2.0 * w);
    const auto up = project_nodal(c2);
    ASSERT_TRUE(up.converged);
    EXPECT_GT(up.t, 0.0);
    EXPECT_GT(up.s, 0.0);
    EXPECT_LE(up.t, 1.0);
    EXPECT_LE(up.s, 1.0);
    EXPECT_TRUE(up.in_unit_box);
    EXPECT_NEAR(up.t, 0.5, 1e-8);
    const auto phi = phi_map(c2, up.t, up.s);
    EXPECT_LE(std::max(std::abs(phi[0]), std::abs(phi[1])), 1e-10 * c2.scale());
  }
}

TEST(ProjectNodal, AgreesWithDenseGridArgmax) {
  std::mt19937_64 rng(16);
  auto d = build_box_grid(8, 1.0);
  const PoissonSolver ps(d);
  const auto c = coefficients(ps, kQuintic, 5.0 * random_smooth_field(d, rng));
  const auto pr = project_nodal(c);
  ASSERT_TRUE(pr.converged);
  const auto box = find_miranda_box(c);
  constexpr int kGrid = 400;
  const double step = (box.R - box.r) / (kGrid - 1);
  double best = -INFINITY, bt = 0, bs = 0;
  for (int i = 0; i < kGrid; ++i)
    for (int j = 0; j < kGrid; ++j) {
      const double t = box.r + i * step, s = box.r + j * step;
      const double h = eval_h(c, t, s);
      if (h > best) {
        best = h;
        bt = t;
        bs = s;
      }
    }
  EXPECT_LE(std::abs(pr.t - bt), step);
  EXPECT_LE(std::abs(pr.s - bs), step);
}

TEST(ProjectNodal, RootIsUniqueInsideBox) {
  std::mt19937_64 rng(17);
  auto d = build_radial_grid(255, 1.0);
  const PoissonSolver ps(d);
  const auto c = coefficients(ps, kQuintic, random_smooth_field(d, rng));
  const auto ref = project_nodal(c);
  for (const auto& r : multistart_roots(c, find_miranda_box(c), 20, 5)) {
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.t, ref.t, 1e-6 * ref.t);
    EXPECT_NEAR(r.s, ref.s, 1e-6 * ref.s);
  }
}

TEST(ProjectNodal, DecouplesIntoScalarProjections) {
  std::mt19937_64 rng(18);
  auto d = build_radial_grid(255, 1.0);
  const PoissonSolver ps(d);
  auto c = coefficients(ps, kQuintic, random_smooth_field(d, rng));
  c.D = 0.0;
  c.E = 0.0;
  const auto pr = project_nodal(c);
  const auto tp = solve_scalar(ScalarCoefficients{c.A_plus, c.B_plus, c.plus});
  const auto tm = solve_scalar(ScalarCoefficients{c.A_minus, c.B_minus, c.minus});
  EXPECT_NEAR(pr.t, tp.t, 1e-8 * tp.t);
  EXPECT_NEAR(pr.s, tm.t, 1e-8 * tm.t);
}

TEST(ProjectScalar, ConstructedRoots) {
  const auto one = solve_scalar(ScalarCoefficients{1.0, 1.0, power_part(2.0, 5.0)});
  ASSERT_TRUE(one.converged);
  EXPECT_NEAR(one.t, 1.0, 1e-10);
  const auto local = solve_scalar(ScalarCoefficients{3.0, 0.0, power_part(3.0, 5.0)});
  ASSERT_TRUE(local.converged);
  EXPECT_NEAR(local.t, 1.0, 1e-10);
  // A + t^2 B = t^3 m with A = 1, B = 0, m = 8: t = 1/2
  const auto half = solve_scalar(ScalarCoefficients{1.0, 0.0, power_part(8.0, 5.0)});
  EXPECT_NEAR(half.t, 0.5, 1e-10);
}

TEST(ProjectScalar, RandomFieldResidual) {
  std::mt19937_64 rng(19);
  auto d = build_radial_grid(255, 1.0);
  const PoissonSolver ps(d);
  for (int k = 0; k < 10; ++k) {
    const Field u = positive_part(random_smooth_field(d, rng));
    const auto pr = project_scalar(ps, kQuintic, u);
    const Field w = pr.t * u;
    const auto e = energy(ps, kQuintic, w);
    EXPECT_LE(std::abs(e.nehari_res), 1e-9 * e.norm_sq);
  }
  EXPECT_THROW(project_scalar(ps, kQuintic, Field(d)), std::invalid_argument);
}

TEST(JacobianDiag, ClosedFormMatchesFiniteDifferences) {
  std::mt19937_64 rng(20);
  auto d = build_radial_grid(255, 1.0);
  const PoissonSolver ps(d);
  const auto c = coefficients(ps, kQuintic, nehari_point(ps, rng));
  const auto jd = jacobian_diag(c);
  const double e = 1e-5;
  const auto pt = phi_map(c, 1 + e, 1), mt = phi_map(c, 1 - e, 1);
  const auto ps_ = phi_map(c, 1, 1 + e), ms = phi_map(c, 1, 1 - e);
  const double j11 = (pt[0] - mt[0]) / (2 * e), j21 = (pt[1] - mt[1]) / (2 * e);
  const double j12 = (ps_[0] - ms[0]) / (2 * e), j22 = (ps_[1] - ms[1]) / (2 * e);
  const double fd_det = j11 * j22 - j12 * j21;
  EXPECT_NEAR(fd_det / jd.det, 1.0, 1e-4);
  // with the coupling terms dropped the determinant reduces to G+ G- - 4 D^2
  auto c0 = c;
  c0.E = 0.0;
  const auto jac = phi_jacobian(c0, 1.0, 1.0);
  const double g_plus = jac[0] - (c0.A_plus + c0.B_plus + c0.D - c0.plus.force(1.0));
  EXPECT_NEAR(-g_plus / jd.G_plus, 1.0, 1e-6);
}

TEST(JacobianDiag, CertificatesAtMinimizer) {
  auto d = build_radial_grid(127, 1.0);
  const PoissonSolver ps(d);
  const auto out = minimize_nodal(ps, kQuintic, initial_guess(d, InitStyle::dipole));
  ASSERT_TRUE(out.converged());
  const auto jd = jacobian_diag(ps, kQuintic, out.w);
  EXPECT_GT(jd.det, 0.0);
  EXPECT_GT(jd.det_continuum, 0.0);
  EXPECT_GT(jd.G_plus, 2.0 * jd.D);
  EXPECT_GT(jd.G_minus, 2.0 * jd.D);
  EXPECT_TRUE(jd.G_dominates);
  EXPECT_THROW(jacobian_diag(ps, kQuintic, 1.3 * out.w), NotOnNodalSet);
}
