#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "lastmile/planner.hpp"
#include "lastmile/rng.hpp"
#include "lastmile/world.hpp"
#include "oracles.hpp"

namespace lastmile::planner {
namespace {

UniformBSpline collinear() {
  return UniformBSpline({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)}, 1.0, 0.0);
}

TEST(Spline, RejectsBadConstruction) {
  EXPECT_THROW(UniformBSpline(std::vector<Vec3>(3, Vec3::Zero()), 0.5, 0.0), std::invalid_argument);
  EXPECT_THROW(UniformBSpline(std::vector<Vec3>(4, Vec3::Zero()), 0.0, 0.0), std::invalid_argument);
}

TEST(Spline, ConstantSplineHasZeroDerivatives) {
  const Vec3 p(1.5, -2.0, 7.25);
  UniformBSpline s(std::vector<Vec3>(7, p), 0.5, 3.0);
  for (double t = s.span_begin(); t <= s.span_end(); t += 0.05) {
    EXPECT_TRUE(s.evaluate(t, 0).isApprox(p, 1e-15));
    EXPECT_EQ(s.evaluate(t, 1).norm(), 0.0);
    EXPECT_EQ(s.evaluate(t, 2).norm(), 0.0);
  }
}

TEST(Spline, CollinearBasisRow) {
  const auto s = collinear();
  EXPECT_NEAR(s.evaluate(0.0).x(), 1.0, 1e-15);
  for (double t = 0.0; t <= 1.0; t += 0.125) {
    EXPECT_NEAR(s.evaluate(t, 1).x(), 1.0, 1e-12);
    EXPECT_NEAR(s.evaluate(t, 2).norm(), 0.0, 1e-12);
  }
}

TEST(Spline, OutOfSpanThrows) {
  const auto s = collinear();
  EXPECT_THROW(s.evaluate(-0.01), OutOfSpan);
  EXPECT_THROW(s.evaluate(1.01), OutOfSpan);
  EXPECT_THROW(s.evaluate(0.5, 3), std::invalid_argument);
}

using oracle::in_hull;

TEST(Spline, ConvexHullContainment) {
  Rng rng = make_stream(1, "hull");
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Vec3> cps;
    for (int i = 0; i < 6; ++i) cps.emplace_back(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    UniformBSpline s(cps, uniform(rng, 0.1, 2.0), uniform(rng, -10, 10));
    for (int k = 0; k < s.num_segments(); ++k) {
      const std::array<Vec3, 4> hull{cps[k], cps[k + 1], cps[k + 2], cps[k + 3]};
      for (int j = 0; j <= 10; ++j) {
        const double t = s.t0() + (k + j / 10.0) * s.dt();
        if (!in_hull(s.evaluate(t), hull, 1e-9)) ++failures;
      }
    }
  }
  EXPECT_EQ(failures, 0);
}

TEST(Spline, DerivativesMatchFiniteDifferences) {
  Rng rng = make_stream(2, "fd");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> cps;
    for (int i = 0; i < 5; ++i) cps.emplace_back(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    UniformBSpline s(cps, 0.5, 0.0);
    const double t = uniform(rng, 0.01, s.span_end() - 0.01);
    const double h = 1e-5;
    const Vec3 fd1 = (s.evaluate(t + h) - s.evaluate(t - h)) / (2 * h);
    const Vec3 fd2 = (s.evaluate(t + h, 1) - s.evaluate(t - h, 1)) / (2 * h);
    EXPECT_LT((fd1 - s.evaluate(t, 1)).norm(), 1e-5);
    EXPECT_LT((fd2 - s.evaluate(t, 2)).norm(), 1e-4);
  }
}

PlannerConfig unit_config() {
  PlannerConfig cfg;
  cfg.v_max = 1.0;
  cfg.a_max = 2.0;
  cfg.margin = 0.5;
  return cfg;
}

TEST(PlanInitial, StraightLineEndsAtGoal) {
  const auto s = plan_initial(Vec3::Zero(), Vec3::Zero(), Vec3(4, 0, 0), 0.0, unit_config());
  EXPECT_LT((s.evaluate(s.span_end()) - Vec3(4, 0, 0)).norm(), 1e-9);
  for (double t = s.span_begin(); t <= s.span_end(); t += 0.01) {
    const Vec3 p = s.evaluate(t);
    EXPECT_EQ(p.y(), 0.0);
    EXPECT_EQ(p.z(), 0.0);
  }
}

TEST(PlanInitial, EndpointInterpolationExact) {
  Rng rng = make_stream(3, "endpoint");
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 a(uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, 0, 30));
    const Vec3 b(uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, 0, 30));
    const auto s = plan_initial(a, Vec3::Zero(), b, 0.0, unit_config());
    EXPECT_LT((s.evaluate(s.span_end()) - b).norm(), 1e-12);
    EXPECT_LT((s.evaluate(s.span_begin()) - a).norm(), 1e-12);
  }
}

TEST(PlanInitial, DegenerateRequestHolds) {
  const Vec3 g(1, 2, 3);
  const auto s = plan_initial(g + Vec3::Constant(1e-9), Vec3::Zero(), g, 0.0, unit_config());
  EXPECT_EQ(s.control_points().size(), 4u);
  EXPECT_TRUE(s.evaluate(s.span_begin()).isApprox(g));
}

TEST(PlanInitial, MatchesStartVelocity) {
  const auto s = plan_initial(Vec3::Zero(), Vec3(1, 0, 0), Vec3(5, 0, 0), 0.0, unit_config());
  EXPECT_LT((s.evaluate(s.t0(), 1) - Vec3(1, 0, 0)).norm(), 1e-6);
}

TEST(PlanInitial, RespectsLimitsInFreeSpace) {
  Rng rng = make_stream(4, "limits");
  for (int trial = 0; trial < 100; ++trial) {
    PlannerConfig cfg;
    cfg.v_max = uniform(rng, 0.5, 3);
    cfg.a_max = uniform(rng, 0.5, 3);
    const Vec3 b(uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, 0, 30));
    const auto s = plan_initial(Vec3::Zero(), Vec3::Zero(), b, 0.0, cfg);
    for (double t = s.span_begin(); t <= s.span_end(); t += s.dt() / 10) {
      ASSERT_LE(s.evaluate(t, 1).norm(), cfg.v_max * (1 + 1e-9));
      ASSERT_LE(s.evaluate(t, 2).norm(), cfg.a_max * (1 + 1e-9));
    }
  }
}

TEST(PlanThrough, FollowsPolyline) {
  const std::vector<Vec3> wps{Vec3(0, 0, 5), Vec3(0, 3, 5)};
  const auto s = plan_through(Vec3(0, 0, 0), Vec3::Zero(), wps, 0.0, unit_config());
  EXPECT_LT((s.evaluate(s.span_end()) - wps.back()).norm(), 1e-12);
  for (const Vec3& c : s.control_points()) {
    // Every control point lies on one of the two legs.
    const bool leg1 = std::abs(c.x()) < 1e-12 && std::abs(c.y()) < 1e-12;
    const bool leg2 = std::abs(c.x()) < 1e-12 && std::abs(c.z() - 5) < 1e-12;
    EXPECT_TRUE(leg1 || leg2);
  }
}

using oracle::Blocked;

TEST(Reoptimize, AvoidsBlockedMidpoint) {
  Blocked b;
  auto cfg = unit_config();
  cfg.opt_window = 32;  // whole path in one call
  const Vec3 goal(5, 0, 1.5);
  const auto init = plan_initial(Vec3(0, 0, 1.5), Vec3::Zero(), goal, 0.0, cfg);
  ASSERT_EQ(b.min_true_clearance(init), 0.0);
  const auto r = reoptimize(init, b.field, b.buf, goal, 0.0, cfg);
  EXPECT_GE(b.min_true_clearance(r.spline), 0.45);
  // The goal clamps are inside this window, so the endpoint term only holds them approximately.
  EXPECT_LT((r.spline.evaluate(r.spline.span_end()) - goal).norm(), 0.05);
}

TEST(Reoptimize, NegativeControlWithoutCollisionTerm) {
  Blocked b;
  auto cfg = unit_config();
  cfg.weights.collision = 0.0;
  const Vec3 goal(5, 0, 1.5);
  const auto init = plan_initial(Vec3(0, 0, 1.5), Vec3::Zero(), goal, 0.0, cfg);
  UniformBSpline out = init;
  try {
    out = reoptimize(init, b.field, b.buf, goal, 0.0, cfg).spline;
  } catch (const InfeasibleTrajectory& e) {
    out = e.best().spline;
  }
  EXPECT_EQ(b.min_true_clearance(out), 0.0);
}

TEST(Reoptimize, StationaryAtGoal) {
  Blocked b;
  const Vec3 goal(-3, 0, 1.5);
  UniformBSpline s(std::vector<Vec3>(8, goal), 0.5, 0.0);
  const auto r = reoptimize(s, b.field, b.buf, goal, 0.0, unit_config());
  for (std::size_t i = 0; i < s.control_points().size(); ++i)
    EXPECT_LT((r.spline.control_points()[i] - s.control_points()[i]).norm(), 1e-6);
}

TEST(Reoptimize, FrozenPointsAndMonotoneCost) {
  Blocked b;
  const auto cfg = unit_config();
  const Vec3 goal(5, 0, 1.5);
  auto s = plan_initial(Vec3(0, 0, 1.5), Vec3::Zero(), goal, 0.0, cfg);
  for (double now = 0.0; now < s.span_end(); now += 0.5) {
    const auto [first, last] = optimization_window(s, now, cfg);
    const auto r = reoptimize(s, b.field, b.buf, goal, now, cfg);
    for (int j = 0; j < first; ++j) EXPECT_EQ(r.spline.control_points()[j], s.control_points()[j]);
    for (std::size_t j = last; j < s.control_points().size(); ++j)
      EXPECT_EQ(r.spline.control_points()[j], s.control_points()[j]);
    for (std::size_t k = 1; k < r.cost_history.size(); ++k) EXPECT_LT(r.cost_history[k], r.cost_history[k - 1]);
    s = r.spline;
  }
  EXPECT_GE(b.min_true_clearance(s), 0.45);
}

TEST(Reoptimize, AcceptedOutputsRespectLimits) {
  Blocked b;
  Rng rng = make_stream(5, "accepted");
  int accepted = 0;
  for (int trial = 0; trial < 30; ++trial) {
    PlannerConfig cfg = unit_config();
    cfg.v_max = uniform(rng, 0.8, 2.5);
    cfg.a_max = uniform(rng, 1.0, 3.0);
    const Vec3 start(uniform(rng, -1, 0.5), uniform(rng, -1.5, 1.5), uniform(rng, 0.5, 2.5));
    const Vec3 goal(uniform(rng, 4.5, 6), uniform(rng, -1.5, 1.5), uniform(rng, 0.5, 2.5));
    const auto init = plan_initial(start, Vec3::Zero(), goal, 0.0, cfg);
    try {
      const auto r = reoptimize(init, b.field, b.buf, goal, 0.0, cfg);
      ++accepted;
      const auto [first, last] = optimization_window(init, 0.0, cfg);
      const int n = static_cast<int>(init.control_points().size());
      const int k0 = std::max(0, first - 3), k1 = last == n ? r.spline.num_segments() - 1 : last - 4;
      for (double t = r.spline.t0() + k0 * r.spline.dt(); t <= r.spline.t0() + (k1 + 1) * r.spline.dt() + 1e-9;
           t += r.spline.dt() / 10) {
        EXPECT_LE(r.spline.evaluate(t, 1).norm(), 1.05 * cfg.v_max);
        EXPECT_LE(r.spline.evaluate(t, 2).norm(), 1.05 * cfg.a_max);
      }
    } catch (const InfeasibleTrajectory&) {
    }
  }
  EXPECT_GT(accepted, 15);
}

TEST(NextSetpoint, ConstantVelocitySpacing) {
  PlannerConfig cfg = unit_config();
  std::vector<Vec3> cps;
  for (int i = 0; i < 12; ++i) cps.emplace_back(0.5 * i, 0, 2);
  UniformBSpline s(cps, 0.5, 0.0);  // 1 m/s
  Vec3 prev = next_setpoint(s, 0.0, cfg).position;
  for (double now = 0.5; now + 0.5 <= s.span_end(); now += 0.5) {
    const auto sp = next_setpoint(s, now, cfg);
    EXPECT_NEAR((sp.position - prev).norm(), 0.5, 1e-12);
    EXPECT_NEAR(sp.yaw, 0.0, 1e-12);
    prev = sp.position;
  }
  EXPECT_THROW(next_setpoint(s, s.span_end(), cfg), OutOfSpan);
}

TEST(NextSetpoint, HoldAndFixedYaw) {
  const Vec3 p(3, 4, 5);
  UniformBSpline s(std::vector<Vec3>(10, p), 0.5, 0.0);
  const auto cfg = unit_config();
  for (double now = 0.0; now + 0.5 <= s.span_end(); now += 0.5) {
    const auto sp = next_setpoint(s, now, cfg, std::nullopt, 1.25);
    EXPECT_EQ(sp.position, p);
    EXPECT_EQ(sp.yaw, 1.25);
  }
  EXPECT_NEAR(next_setpoint(s, 0.0, cfg, 4.0).yaw, 4.0 - 2 * std::numbers::pi, 1e-12);
}

TEST(Config, Validation) {
  PlannerConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.margin = 3.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg = PlannerConfig{};
  cfg.setpoint_rate = 0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
}

}  // namespace
}  // namespace lastmile::planner
