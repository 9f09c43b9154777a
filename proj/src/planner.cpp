#include "lastmile/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace lastmile::planner {
namespace {

constexpr double kSpanTol = 1e-9;
constexpr double kGradStep = 1e-4;
constexpr double kMinImprovement = 1e-6;
constexpr int kSamplesPerSegment = 10;  // dt/10 sampling

std::array<double, 4> position_basis(double s) {
  const double s2 = s * s, s3 = s2 * s, m = 1.0 - s;
  return {m * m * m / 6.0, (3.0 * s3 - 6.0 * s2 + 4.0) / 6.0, (-3.0 * s3 + 3.0 * s2 + 3.0 * s + 1.0) / 6.0, s3 / 6.0};
}

// Conservative clearance: the field measures to occupied cell centers, the
// obstacle surface can be up to one cell closer.
double clearance_at(const mapping::DistanceField& field, const Vec3& p) {
  return field.signed_distance_at(p) - field.resolution();
}

struct SegmentRange {
  int first = 0;
  int last = -1;  // inclusive
};

// Segments moved by the window [first, last) that depend on no point past
// it. Later segments are judged on later ticks, once the window reaches them.
SegmentRange committed_segments(const UniformBSpline& s, int first, int last) {
  const int n = static_cast<int>(s.control_points().size());
  return {std::max(0, first - 3), last == n ? s.num_segments() - 1 : std::max(first - 3, last - 4)};
}

template <typename F>
void for_each_sample(const UniformBSpline& s, SegmentRange r, F&& f) {
  for (int k = r.first; k <= r.last; ++k) {
    const int n = (k == r.last) ? kSamplesPerSegment + 1 : kSamplesPerSegment;
    for (int j = 0; j < n; ++j) f(s.t0() + (k + double(j) / kSamplesPerSegment) * s.dt());
  }
}

struct Check {
  double min_clearance = std::numeric_limits<double>::infinity();
  double max_speed = 0.0;
  double max_accel = 0.0;
};

Check check_segments(const UniformBSpline& s, SegmentRange r, const mapping::DistanceField& field) {
  Check c;
  for_each_sample(s, r, [&](double t) {
    c.min_clearance = std::min(c.min_clearance, clearance_at(field, s.evaluate(t, 0)));
    c.max_speed = std::max(c.max_speed, s.evaluate(t, 1).norm());
    c.max_accel = std::max(c.max_accel, s.evaluate(t, 2).norm());
  });
  return c;
}

bool feasible(const Check& c, const PlannerConfig& cfg) {
  return c.min_clearance >= 0.9 * cfg.margin && c.max_speed <= 1.05 * cfg.v_max &&
         c.max_accel <= 1.05 * cfg.a_max;
}

struct Descent {
  UniformBSpline spline;
  double cost = 0.0;
  int iterations = 0;
  std::vector<double> history;
};

Descent descend(UniformBSpline s, int first, int last, const mapping::DistanceField& field,
                const mapping::OccupancyRingBuffer& buf, const Vec3& goal, const PlannerConfig& cfg) {
  auto cost = [&](const UniformBSpline& x) { return trajectory_cost(x, first, last, field, buf, goal, cfg); };
  Descent d{s, cost(s), 0, {}};
  d.history.push_back(d.cost);
  const int nvar = 3 * (last - first);
  if (nvar == 0) return d;
  std::vector<double> grad(nvar);
  double alpha = cfg.step_size;
  for (int it = 0; it < cfg.opt_iters; ++it) {
    auto& cps = d.spline.mutable_control_points();
    double gnorm2 = 0.0;
    for (int v = 0; v < nvar; ++v) {
      double& x = cps[first + v / 3][v % 3];
      const double x0 = x;
      x = x0 + kGradStep;
      const double ep = cost(d.spline);
      x = x0 - kGradStep;
      const double em = cost(d.spline);
      x = x0;
      grad[v] = (ep - em) / (2.0 * kGradStep);
      gnorm2 += grad[v] * grad[v];
    }
    d.iterations = it + 1;
    if (!(gnorm2 > 1e-24)) break;
    const double gnorm = std::sqrt(gnorm2);

    // Backtracking along the unit descent direction; only strict decreases are taken.
    bool accepted = false;
    double new_cost = d.cost;
    UniformBSpline cand = d.spline;
    while (alpha >= 1e-7) {
      auto& c = cand.mutable_control_points();
      for (int v = 0; v < nvar; ++v) c[first + v / 3][v % 3] = cps[first + v / 3][v % 3] - alpha * grad[v] / gnorm;
      new_cost = cost(cand);
      if (new_cost < d.cost) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    const double improvement = d.cost - new_cost;
    d.spline = std::move(cand);
    d.cost = new_cost;
    d.history.push_back(new_cost);
    alpha = std::min(2.0 * alpha, 8.0 * cfg.step_size);
    if (improvement < kMinImprovement) break;
  }
  return d;
}

}  // namespace

void validate(const PlannerConfig& cfg) {
  if (!(cfg.v_max > 0.0) || !(cfg.a_max > 0.0)) throw std::invalid_argument("v_max and a_max must be > 0");
  if (!(cfg.setpoint_rate > 0.0)) throw std::invalid_argument("setpoint_rate must be > 0");
  if (!(cfg.margin < cfg.d_max)) throw std::invalid_argument("margin must be < d_max");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (cfg.opt_window < 1 || cfg.opt_iters < 0) throw std::invalid_argument("bad optimizer window/iterations");
  if (!(cfg.step_size > 0.0)) throw std::invalid_argument("step_size must be > 0");
  if (!(cfg.cruise_fraction > 0.0 && cfg.cruise_fraction <= 1.0))
    throw std::invalid_argument("cruise_fraction must be in (0, 1]");
}

UniformBSpline::UniformBSpline(std::vector<Vec3> control_points, double dt, double t0)
    : cps_(std::move(control_points)), dt_(dt), t0_(t0) {
  if (cps_.size() < kDegree + 1) throw std::invalid_argument("spline needs at least 4 control points");
  if (!(dt > 0.0)) throw std::invalid_argument("spline dt must be > 0");
}

int UniformBSpline::segment_index(double t) const {
  const int i = static_cast<int>(std::floor((t - t0_) / dt_));
  return std::clamp(i, 0, num_segments() - 1);
}

Vec3 UniformBSpline::evaluate(double t, int order) const {
  if (t < span_begin() - kSpanTol || t > span_end() + kSpanTol)
    throw OutOfSpan("spline evaluated outside its span");
  const int i = segment_index(t);
  const double s = std::clamp((t - t0_) / dt_ - i, 0.0, 1.0);
  const Vec3& p0 = cps_[i];
  const Vec3& p1 = cps_[i + 1];
  const Vec3& p2 = cps_[i + 2];
  const Vec3& p3 = cps_[i + 3];
  switch (order) {
    case 0: {
      const auto b = position_basis(s);
      // Anchored on p1 so repeated control points reproduce exactly.
      return p1 + b[0] * (p0 - p1) + b[2] * (p2 - p1) + b[3] * (p3 - p1);
    }
    case 1: {
      // Quadratic basis over control-point differences; exactly zero for repeated points.
      const double m = 1.0 - s;
      return (0.5 * m * m * (p1 - p0) + (0.5 + s - s * s) * (p2 - p1) + 0.5 * s * s * (p3 - p2)) / dt_;
    }
    case 2:
      return ((1.0 - s) * (p2 - 2.0 * p1 + p0) + s * (p3 - 2.0 * p2 + p1)) / (dt_ * dt_);
    default:
      throw std::invalid_argument("spline derivative order must be 0, 1 or 2");
  }
}

UniformBSpline plan_through(const Vec3& start, const Vec3& start_vel, const std::vector<Vec3>& waypoints,
                            double t0, const PlannerConfig& cfg) {
  if (waypoints.empty()) throw std::invalid_argument("plan_through needs at least one waypoint");
  const Vec3& goal = waypoints.back();
  const double dt = cfg.dt;
  if ((goal - start).norm() <= 1e-6 && start_vel.norm() * dt <= 1e-6 && waypoints.size() == 1)
    return UniformBSpline(std::vector<Vec3>(4, goal), dt, t0);

  std::vector<Vec3> cps{start - start_vel * dt, start, start + start_vel * dt};
  std::vector<Vec3> poly{cps.back()};
  for (const Vec3& w : waypoints)
    if ((w - poly.back()).norm() > 1e-9) poly.push_back(w);

  double length = 0.0;
  for (std::size_t i = 1; i < poly.size(); ++i) length += (poly[i] - poly[i - 1]).norm();
  // Uniform spacing bounded so that ramping from rest to cruise and back
  // within one knot stays inside the acceleration limit.
  const double max_step = cfg.cruise_fraction * std::min(cfg.v_max * dt, cfg.a_max * dt * dt);
  const int n = std::max(1, static_cast<int>(std::ceil(length / max_step - 1e-9)));
  const double step = length / n;
  std::size_t seg = 1;
  double seg_start = 0.0;
  for (int k = 1; k < n; ++k) {
    const double s = k * step;
    while (seg + 1 < poly.size() && seg_start + (poly[seg] - poly[seg - 1]).norm() < s) {
      seg_start += (poly[seg] - poly[seg - 1]).norm();
      ++seg;
    }
    const double len = (poly[seg] - poly[seg - 1]).norm();
    const double f = len > 0.0 ? std::clamp((s - seg_start) / len, 0.0, 1.0) : 1.0;
    cps.push_back(poly[seg - 1] + f * (poly[seg] - poly[seg - 1]));
  }
  for (int k = 0; k < 3; ++k) cps.push_back(goal);
  return UniformBSpline(std::move(cps), dt, t0);
}

UniformBSpline plan_initial(const Vec3& start, const Vec3& start_vel, const Vec3& goal, double t0,
                            const PlannerConfig& cfg) {
  return plan_through(start, start_vel, {goal}, t0, cfg);
}

std::pair<int, int> optimization_window(const UniformBSpline& spline, double now, const PlannerConfig& cfg) {
  const int n = static_cast<int>(spline.control_points().size());
  // Control points of the segment being flown (and everything before) are frozen.
  const int first = std::min(n, spline.segment_index(now) + 4);
  return {first, std::min(n, first + cfg.opt_window)};
}

double trajectory_cost(const UniformBSpline& s, int first, int last, const mapping::DistanceField& field,
                       const mapping::OccupancyRingBuffer& buf, const Vec3& goal, const PlannerConfig& cfg) {
  const Weights& w = cfg.weights;
  const auto& cps = s.control_points();
  const int n = static_cast<int>(cps.size());
  double e_end = (s.evaluate(s.span_end()) - goal).squaredNorm();

  double e_col = 0.0;
  for (int j = first; j < last; ++j) {
    const double pen = std::max(0.0, cfg.margin - clearance_at(field, cps[j]));
    e_col += pen * pen;
  }
  double e_smooth = 0.0;
  for (int j = std::max(1, first - 1); j <= std::min(n - 2, last); ++j)
    e_smooth += (cps[j - 1] - 2.0 * cps[j] + cps[j + 1]).squaredNorm();

  double e_lim = 0.0;
  int samples = 0, unknown = 0;
  const SegmentRange r = committed_segments(s, first, last);
  for_each_sample(s, r, [&](double t) {
    const Vec3 p = s.evaluate(t, 0);
    const double pen = std::max(0.0, cfg.margin - clearance_at(field, p));
    e_col += pen * pen;
    const double dv = std::max(0.0, s.evaluate(t, 1).norm() - cfg.v_max);
    const double da = std::max(0.0, s.evaluate(t, 2).norm() - cfg.a_max);
    e_lim += (dv * dv + da * da) / kSamplesPerSegment;
    ++samples;
    if (buf.occupancy_at(p) == mapping::Occupancy::kUnknown) ++unknown;
  });
  const double e_unknown = samples > 0 ? double(unknown) / samples : 0.0;
  return w.endpoint * e_end + w.collision * e_col + w.smooth * e_smooth + w.limits * e_lim +
         w.unknown * e_unknown;
}

ReoptResult reoptimize(const UniformBSpline& spline, const mapping::DistanceField& field,
                       const mapping::OccupancyRingBuffer& buf, const Vec3& goal, double now,
                       const PlannerConfig& cfg) {
  const auto [first, last] = optimization_window(spline, now, cfg);
  ReoptResult result;
  result.spline = spline;
  if (first >= last) {
    result.cost_before = result.cost_after = trajectory_cost(spline, first, first, field, buf, goal, cfg);
    result.cost_history = {result.cost_before};
    result.min_clearance = std::numeric_limits<double>::infinity();
    return result;
  }
  const SegmentRange r = committed_segments(spline, first, last);

  const bool seed_collides = check_segments(spline, r, field).min_clearance < cfg.margin;
  Descent best = descend(spline, first, last, field, buf, goal, cfg);
  Check best_check = check_segments(best.spline, r, field);
  result.cost_before = best.history.front();
  bool ok = feasible(best_check, cfg);

  // Descent from a seed running into an obstacle tends to stall against its
  // face (or on a symmetric saddle when it hits the center). Also try
  // laterally and vertically displaced copies of the window and keep the
  // cheapest feasible result. Pointless without a collision term.
  if ((!ok || seed_collides) && cfg.weights.collision > 0.0) {
    const auto& cps = spline.control_points();
    Vec3 along = goal - cps[first - 1];
    along.z() = 0.0;
    along = along.norm() > 1e-6 ? along.normalized() : Vec3::UnitX();
    const Vec3 side(-along.y(), along.x(), 0.0);
    const std::array<Vec3, 6> dirs{side, -side, Vec3::UnitZ(), -Vec3::UnitZ(), (side + Vec3::UnitZ()).normalized(),
                                   (-side + Vec3::UnitZ()).normalized()};
    const double mags[] = {cfg.margin + 0.5, 2.0 * cfg.margin + 1.0};
    for (double mag : mags) {
      for (const Vec3& dir : dirs) {
        UniformBSpline start = spline;
        auto& c = start.mutable_control_points();
        // Ramp the displacement in so the seed stays within the limits near the frozen part.
        const double ramp = std::max(1.0, 0.5 * (last - first));
        for (int j = first; j < last; ++j) c[j] += std::min(1.0, (j - first + 1) / ramp) * mag * dir;
        Descent d = descend(start, first, last, field, buf, goal, cfg);
        ++result.restarts;
        const Check chk = check_segments(d.spline, r, field);
        if (feasible(chk, cfg) && (!ok || d.cost < best.cost)) {
          best = std::move(d);
          best_check = chk;
          ok = true;
        }
      }
      if (ok) break;
    }
  }

  result.spline = best.spline;
  result.cost_after = best.cost;
  result.iterations = best.iterations;
  result.cost_history = best.history;
  result.min_clearance = best_check.min_clearance;
  if (!ok) throw InfeasibleTrajectory("no trajectory satisfies the clearance and limit constraints", result);
  return result;
}

double spline_clearance(const UniformBSpline& spline, const mapping::DistanceField& field, double t_begin,
                        double t_end) {
  double m = std::numeric_limits<double>::infinity();
  const double a = std::max(t_begin, spline.span_begin());
  const double b = std::min(t_end, spline.span_end());
  const double h = spline.dt() / kSamplesPerSegment;
  for (int k = 0; a + k * h <= b + kSpanTol; ++k)
    m = std::min(m, clearance_at(field, spline.evaluate(std::min(a + k * h, b))));
  return m;
}

Setpoint next_setpoint(const UniformBSpline& spline, double now, const PlannerConfig& cfg,
                       std::optional<double> fixed_yaw, double hold_yaw) {
  const double t = now + 1.0 / cfg.setpoint_rate;
  Setpoint sp;
  sp.position = spline.evaluate(t, 0);
  sp.stamp = now;
  if (fixed_yaw) {
    sp.yaw = wrap_angle(*fixed_yaw);
  } else {
    const Vec3 v = spline.evaluate(t, 1);
    sp.yaw = std::hypot(v.x(), v.y()) > 0.1 ? std::atan2(v.y(), v.x()) : hold_yaw;
  }
  return sp;
}

}  // namespace lastmile::planner
