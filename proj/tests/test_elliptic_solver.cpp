#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lane_emden/elliptic_solver.hpp"
#include "lane_emden/radial_oracle.hpp"

using namespace lane_emden;

namespace {

GridPtr unit_disk(int n) { return build_grid(DomainSpec::disk({0, 0}, 1), 2.0 / n); }

Field oracle_field(const GridPtr& g, const RadialSolution& s) {
  return Field::sample(g, [&](Point x) { return s.unit_disk_value(norm(x)); });
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

void expect_accepted(const DiscreteLaplacian& lap, const ContinuationStep& s, const NewtonSettings& ns) {
  const double scale = std::max(1.0, positive_power(s.u.max_value(), s.p));
  EXPECT_LE(residual(lap, s.u, s.p).max_abs(), ns.tolerance * scale) << s.p;
  EXPECT_GE(s.u.min_value(), 0.0) << s.p;
  EXPECT_TRUE(s.u.all_finite());
  const double e = lap.gradient_energy(s.u);
  EXPECT_LE(std::abs(e - lap.sbp_pairing(s.u)), 1e-10 * e) << s.p;
}

}  // namespace

TEST(Residual, ZeroField) {
  const auto g = unit_disk(64);
  EXPECT_EQ(residual(DiscreteLaplacian(g), Field(g), 3.0).max_abs(), 0.0);
}

TEST(Residual, ClampedNegativeConstant) {
  const auto g = unit_disk(64);
  const Field u = Field::sample(g, [](Point) { return -0.7; });
  const Field r = residual(DiscreteLaplacian(g), u, 4.0);
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (g->unknown_kind(k) == NodeKind::interior) {
      EXPECT_NEAR(r[k], 0.0, 1e-10);
    }
  }
}

TEST(Residual, OracleTruncationErrorIsSecondOrder) {
  const RadialSolution s = shoot(10.0);
  auto res = [&](int n) {
    const auto g = unit_disk(n);
    return residual(DiscreteLaplacian(g), oracle_field(g, s), 10.0).max_abs();
  };
  const double ratio = res(128) / res(256);
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(Newton, QuadraticFromOracleGuess) {
  const RadialSolution s = shoot(10.0);
  const auto g = unit_disk(128);
  const NewtonResult r = newton_solve(oracle_field(g, s), 10.0);
  EXPECT_LE(r.iterations, 3);
  EXPECT_LE(r.residual, 1e-10);
}

TEST(Newton, ZeroGuessIsTrivial) {
  const auto g = unit_disk(64);
  EXPECT_EQ(code_of([&] { newton_solve(Field(g), 3.0); }), ErrorCode::ConvergedToZero);
}

TEST(Newton, RejectsBadSettings) {
  const auto g = unit_disk(64);
  NewtonSettings s;
  s.max_iterations = 0;
  EXPECT_EQ(code_of([&] { newton_solve(Field(g), 3.0, s); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { newton_solve(Field(g), 1.0); }), ErrorCode::InvalidArgument);
}

TEST(Newton, HeightMatchesOracleAfterContinuation) {
  const DiscreteLaplacian lap(unit_disk(256));
  const ContinuationRun run = continue_in_p(lap, 2.0, 10.0);
  ASSERT_EQ(run.status, RunStatus::completed);
  EXPECT_NEAR(run.steps.back().u.max_value(), shoot(10.0).height, 5e-3);
}

TEST(InitialGuess, SquareEigenpair) {
  const double pi = std::numbers::pi;
  const auto g = build_grid(DomainSpec::rectangle({0, 0}, {pi, pi}), pi / 64);
  const DiscreteLaplacian lap(g);
  const Eigenpair e = first_eigenpair(lap);
  EXPECT_NEAR(e.lambda, 2.0, 2e-3);
  const Field ref = Field::sample(g, [](Point x) { return std::sin(x.x) * std::sin(x.y); });
  EXPECT_LT(max_abs_difference(e.phi, ref), 2e-3);
  const Field u = initial_guess(lap, 2.0);
  EXPECT_NEAR(u.max_value(), 2.0, 4e-3);
}

TEST(InitialGuess, DiskEigenvalueIsBesselZeroSquared) {
  const DiscreteLaplacian lap(unit_disk(128));
  const double j0 = shoot(1.0).r0;
  const Eigenpair e = first_eigenpair(lap);
  EXPECT_NEAR(e.lambda, j0 * j0, 5e-3);
  const Field u = initial_guess(lap, 3.0);
  EXPECT_NEAR(u.max_value(), std::sqrt(e.lambda), 1e-12);
  EXPECT_GT(u.min_value(), 0.0);
  EXPECT_THROW(initial_guess(lap, 6.0), Error);
}

TEST(InitialGuess, PositiveOnAnnulusAndPolygon) {
  for (const auto& spec : {DomainSpec::annulus({0, 0}, 0.3, 1),
                           DomainSpec::polygon({{0, 0}, {2, 0}, {2, 1}, {1, 1.5}, {0, 1}})}) {
    const Field u = initial_guess(DiscreteLaplacian(build_grid(spec, 0.02)), 2.0);
    EXPECT_GT(u.min_value(), 0.0) << spec.kind();
  }
}

TEST(MultiBubbleGuess, PeakHeightIsSqrtE) {
  const auto g = unit_disk(64);
  const Field u = multi_bubble_guess(g, 50.0, {{0, 0}});
  EXPECT_NEAR(u.max_value(), std::exp(0.5), 1e-12);
  EXPECT_GE(u.min_value(), 0.0);
}

TEST(MultiBubbleGuess, RejectsCentersNearBoundary) {
  const auto g = unit_disk(64);
  EXPECT_EQ(code_of([&] { multi_bubble_guess(g, 50.0, {{1 - g->spacing(), 0}}); }), ErrorCode::CenterOutside);
  EXPECT_EQ(code_of([&] { multi_bubble_guess(g, 5.0, {{0, 0}}); }), ErrorCode::InvalidArgument);
}

TEST(MultiBubbleGuess, NewtonAgreesWithContinuation) {
  const DiscreteLaplacian lap(unit_disk(64));
  ContinuationOptions o;
  o.milestones = {20.0};
  const ContinuationRun run = continue_in_p(lap, 2.0, 50.0, {}, o);
  ASSERT_EQ(run.status, RunStatus::completed);
  NewtonSettings s;
  s.max_iterations = 100;
  const NewtonResult direct = newton_solve(lap, multi_bubble_guess(lap.grid_ptr(), 50.0, {{0, 0}}), 50.0, s);
  EXPECT_LE(max_abs_difference(direct.u, run.steps.back().u), 1e-6);
}

TEST(MultiBubbleGuess, AnnulusTwoPeaks) {
  const auto g = build_grid(DomainSpec::annulus({0, 0}, 0.3, 1), 2.0 / 128);
  const std::vector<Point> centers{{0.6, 0.0}, {-0.6, 0.0}};
  NewtonSettings s;
  s.max_iterations = 100;
  const NewtonResult r = newton_solve(DiscreteLaplacian(g), multi_bubble_guess(g, 50.0, centers), 50.0, s);
  const auto peaks = detail::dominant_maxima(r.u);
  ASSERT_EQ(peaks.size(), 2u);
  for (Point c : centers) {
    double best = 1e9;
    for (Point y : peaks) best = std::min(best, distance(c, y));
    EXPECT_LE(best, 3 * g->spacing());
  }
}

TEST(Continuation, SingleValueWhenStartEqualsEnd) {
  const DiscreteLaplacian lap(unit_disk(64));
  const ContinuationRun run = continue_in_p(lap, 3.0, 3.0);
  ASSERT_EQ(run.steps.size(), 1u);
  EXPECT_EQ(run.steps[0].p, 3.0);
  EXPECT_EQ(run.status, RunStatus::completed);
}

TEST(Continuation, BranchTelemetryAndAcceptedInvariants) {
  const DiscreteLaplacian lap(unit_disk(128));
  ContinuationOptions o;
  o.milestones = {10.0, 20.0};
  const NewtonSettings ns;
  const ContinuationRun run = continue_in_p(lap, 2.0, 100.0, ns, o);
  EXPECT_EQ(run.status, RunStatus::completed);
  EXPECT_EQ(run.steps.back().p, 100.0);
  for (std::size_t i = 1; i < run.steps.size(); ++i) EXPECT_LT(run.steps[i - 1].p, run.steps[i].p);
  for (const auto& s : run.steps) expect_accepted(lap, s, ns);
  // Along the resolved part of the branch the height decreases.
  double prev = 1e300;
  for (const auto& s : run.steps)
    if (s.p > 5.0 && s.p <= 11.0) {
      EXPECT_LT(s.u.max_value(), prev) << s.p;
      prev = s.u.max_value();
    }
  bool hit10 = false;
  for (const auto& s : run.steps) hit10 |= (s.p == 10.0);
  EXPECT_TRUE(hit10);
}

TEST(Continuation, StallsWithoutReseed) {
  const DiscreteLaplacian lap(unit_disk(128));
  ContinuationOptions o;
  o.reseed = false;
  const ContinuationRun run = continue_in_p(lap, 2.0, 30.0, {}, o);
  EXPECT_EQ(run.status, RunStatus::stalled);
  EXPECT_FALSE(run.stall_reason.empty());
  EXPECT_LT(run.steps.back().p, 30.0);
}
