#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "lane_emden/liouville.hpp"

using namespace lane_emden;

TEST(EvalU, ClosedFormValues) {
  EXPECT_EQ(eval_U({0, 0}), 0.0);
  EXPECT_NEAR(eval_U({std::sqrt(8.0), 0}), -2 * std::log(2.0), 1e-15);
  EXPECT_NEAR(eval_U({0, std::sqrt(8.0)}), -1.386294, 1e-6);
}

TEST(EvalU, SolvesLiouvilleEquation) {
  const double d = 1e-4;
  for (Point x : {Point{1, 0}, Point{0.6, 0.8}, Point{-0.28, 0.96}}) {
    const double lap = (eval_U(x + Point{d, 0}) + eval_U(x - Point{d, 0}) + eval_U(x + Point{0, d}) +
                        eval_U(x - Point{0, d}) - 4 * eval_U(x)) /
                       (d * d);
    EXPECT_NEAR(lap + std::exp(eval_U(x)), 0.0, 1e-6);
  }
}

TEST(EvalU, DensityIdentityAndMonotonicity) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const double s = u(rng);
    EXPECT_NEAR(std::exp(liouville_U(s)), liouville_density(s), 1e-14 * std::max(1.0, liouville_density(s)));
    const double t = u(rng);
    if (s != t) {
      EXPECT_GT(liouville_U(std::min(s, t)), liouville_U(std::max(s, t)));
    }
  }
}

TEST(MassIntegrals, TotalMassAndLogMoment) {
  const double tol = 1e-10;
  const MassIntegrals m = mass_integrals(100.0, tol);
  EXPECT_NEAR(m.mass, 8 * std::numbers::pi, tol * 8 * std::numbers::pi);
  EXPECT_NEAR(m.log_moment, 12 * std::numbers::pi * std::log(2.0), 1e-6);
}

TEST(MassIntegrals, LogMomentAgainstBruteForce) {
  // Midpoint rule in s^2 = 8x, x in (0, inf) mapped by x = y/(1-y).
  const int n = 2000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = (i + 0.5) / n, x = y / (1 - y), dx = 1.0 / ((1 - y) * (1 - y));
    sum += 0.5 * std::log(8 * x) / ((1 + x) * (1 + x)) * dx;
  }
  EXPECT_NEAR(mass_integrals().log_moment, 8 * std::numbers::pi * sum / n, 1e-6);
}

TEST(MassIntegrals, HalfMassInsideScaleRadius) {
  EXPECT_NEAR(liouville_mass_within(std::sqrt(8.0)), 4 * std::numbers::pi, 1e-12);
}

TEST(MassIntegrals, IndependentOfCutoff) {
  const double tol = 1e-10;
  const MassIntegrals a = mass_integrals(100.0, tol), b = mass_integrals(1000.0, tol), c = mass_integrals(3e4, tol);
  EXPECT_NEAR(a.mass, b.mass, tol * a.mass);
  EXPECT_NEAR(a.mass, c.mass, tol * a.mass);
  EXPECT_NEAR(a.log_moment, c.log_moment, 1e-8);
}

TEST(MassIntegrals, RejectsSmallCutoff) {
  EXPECT_THROW(mass_integrals(50.0), Error);
  EXPECT_THROW(mass_integrals(100.0, 1e-6), Error);
}
