#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "lastmile/mapping.hpp"
#include "lastmile/types.hpp"

namespace lastmile::planner {

struct Weights {
  double endpoint = 1.0;
  double collision = 10.0;
  double smooth = 0.1;
  double limits = 1.0;
  double unknown = 0.5;
};

struct PlannerConfig {
  double v_max = 2.0;
  double a_max = 2.0;
  double setpoint_rate = 2.0;
  double margin = 0.6;
  double d_max = 2.0;
  Weights weights;
  double dt = 0.5;  // knot spacing
  int opt_window = 6;
  int opt_iters = 50;
  double step_size = 0.1;  // initial line-search step, meters of control-point motion
  // Seeded paths cruise at this fraction of the limits, leaving time for detours.
  double cruise_fraction = 0.7;
};

// Throws std::invalid_argument.
void validate(const PlannerConfig& cfg);

struct Setpoint {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double stamp = 0.0;
};

class OutOfSpan : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Cubic uniform B-spline. Segment i (0-based) covers
/// [t0 + i*dt, t0 + (i+1)*dt] and uses control points i..i+3.
class UniformBSpline {
 public:
  static constexpr int kDegree = 3;

  UniformBSpline() = default;
  /// Throws std::invalid_argument for fewer than 4 points or dt <= 0.
  UniformBSpline(std::vector<Vec3> control_points, double dt, double t0);

  const std::vector<Vec3>& control_points() const { return cps_; }
  std::vector<Vec3>& mutable_control_points() { return cps_; }
  double dt() const { return dt_; }
  double t0() const { return t0_; }
  int num_segments() const { return static_cast<int>(cps_.size()) - kDegree; }
  double span_begin() const { return t0_; }
  double span_end() const { return t0_ + num_segments() * dt_; }

  /// Segment containing t, clamped to the valid range. The end of the span
  /// belongs to the last segment.
  int segment_index(double t) const;
  /// order 0, 1 or 2. Throws OutOfSpan outside [span_begin, span_end].
  Vec3 evaluate(double t, int order = 0) const;

 private:
  std::vector<Vec3> cps_;
  double dt_ = 1.0;
  double t0_ = 0.0;
};

/// Control points spaced at most cruise_fraction*min(v_max*dt, a_max*dt^2) along the
/// polyline start -> waypoints..., with the first three matching start and
/// start_vel and the last three clamped to the final waypoint.
UniformBSpline plan_through(const Vec3& start, const Vec3& start_vel, const std::vector<Vec3>& waypoints,
                            double t0, const PlannerConfig& cfg);
UniformBSpline plan_initial(const Vec3& start, const Vec3& start_vel, const Vec3& goal, double t0,
                            const PlannerConfig& cfg);

struct ReoptResult {
  UniformBSpline spline;
  double cost_before = 0.0;
  double cost_after = 0.0;
  int iterations = 0;
  int restarts = 0;
  // Smallest conservative clearance (field distance minus one cell) over the checked samples.
  double min_clearance = 0.0;
  std::vector<double> cost_history;  // accepted costs of the final descent
};

class InfeasibleTrajectory : public std::runtime_error {
 public:
  InfeasibleTrajectory(const std::string& what, ReoptResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const ReoptResult& best() const { return best_; }

 private:
  ReoptResult best_;
};

/// Indices [first, last) of the control points reoptimize may move at time now.
std::pair<int, int> optimization_window(const UniformBSpline& spline, double now, const PlannerConfig& cfg);

/// Gradient descent on the window of non-frozen control points. Throws
/// InfeasibleTrajectory when the result violates the clearance or limit
/// checks on the segments the window fully determines.
ReoptResult reoptimize(const UniformBSpline& spline, const mapping::DistanceField& field,
                       const mapping::OccupancyRingBuffer& buf, const Vec3& goal, double now,
                       const PlannerConfig& cfg);

/// Cost that reoptimize minimizes, restricted to terms touched by [first, last).
double trajectory_cost(const UniformBSpline& spline, int first, int last, const mapping::DistanceField& field,
                       const mapping::OccupancyRingBuffer& buf, const Vec3& goal, const PlannerConfig& cfg);

/// Smallest conservative clearance over dt/10 samples of [t_begin, t_end]
/// (clipped to the span).
double spline_clearance(const UniformBSpline& spline, const mapping::DistanceField& field, double t_begin,
                        double t_end);

/// Samples the spline at now + 1/setpoint_rate. Yaw faces the horizontal
/// direction of travel unless fixed_yaw is given; when nearly stationary it
/// keeps hold_yaw. Throws OutOfSpan past the end of the spline.
Setpoint next_setpoint(const UniformBSpline& spline, double now, const PlannerConfig& cfg,
                       std::optional<double> fixed_yaw = std::nullopt, double hold_yaw = 0.0);

}  // namespace lastmile::planner
