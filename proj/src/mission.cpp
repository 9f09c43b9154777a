#include "lastmile/mission.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace lastmile::mission {
namespace {

using S = MissionState;

double horizontal_distance(const Vec3& a, const Vec3& b) { return std::hypot(a.x() - b.x(), a.y() - b.y()); }

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace

std::string_view to_string(MissionState s) {
  switch (s) {
    case S::kIdle: return "IDLE";
    case S::kTakeoff: return "TAKEOFF";
    case S::kGpsTransit: return "GPS_TRANSIT";
    case S::kDescentScan: return "DESCENT_SCAN";
    case S::kMarkerApproach: return "MARKER_APPROACH";
    case S::kDropOff: return "DROP_OFF";
    case S::kReturn: return "RETURN";
    case S::kAscendAbort: return "ASCEND_ABORT";
    case S::kLand: return "LAND";
    case S::kFailed: return "FAILED";
    case S::kDone: return "DONE";
  }
  return "?";
}

bool is_terminal(MissionState s) { return s == S::kDone || s == S::kFailed; }

bool allowed_transition(MissionState from, MissionState to) {
  switch (from) {
    case S::kIdle: return to == S::kTakeoff;
    case S::kTakeoff: return to == S::kGpsTransit;
    case S::kGpsTransit: return to == S::kDescentScan || to == S::kLand;
    case S::kDescentScan: return to == S::kMarkerApproach || to == S::kAscendAbort;
    case S::kMarkerApproach: return to == S::kDropOff || to == S::kAscendAbort;
    case S::kDropOff: return to == S::kReturn;
    case S::kReturn: return to == S::kGpsTransit;
    case S::kAscendAbort: return to == S::kGpsTransit;
    case S::kLand: return to == S::kDone || to == S::kFailed;
    case S::kFailed:
    case S::kDone: return false;
  }
  return false;
}

// --- MarkerFilter ------------------------------------------------------------

void MarkerFilter::add(const Vec3& p) {
  window_.push_back(p);
  if (static_cast<int>(window_.size()) > k_) window_.pop_front();
  ++count_;
  ++consecutive_;
}

std::optional<Vec3> MarkerFilter::filtered_position() const {
  if (!ready()) return std::nullopt;
  Vec3 out;
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<double> v;
    for (const Vec3& p : window_) v.push_back(p[axis]);
    out[axis] = median(std::move(v));
  }
  return out;
}

// --- fusion / path ---------------------------------------------------------

Pose fuse_state(const std::optional<sensors::GpsFix>& gps, const sensors::OdomEstimate& odom, double rooftop_height,
                FusionMemory& memory) {
  const Vec3 offset = memory.offset.value_or(Vec3::Zero());
  Pose pose;
  pose.frame = Frame::kWorld;
  pose.yaw = odom.yaw;
  pose.position = odom.position + offset;
  if (gps && !gps->degraded && gps->position.z() > rooftop_height) {
    const Vec3 d = gps->position - odom.position;
    memory.offset = memory.offset ? Vec3((1.0 - memory.alpha) * *memory.offset + memory.alpha * d) : d;
    pose.position = gps->position;
  }
  return pose;
}

void PathRecorder::record(const Vec3& p) {
  if (points_.empty() || (p - points_.back()).norm() >= spacing_) points_.push_back(p);
}

std::vector<Vec3> record_and_reverse_path(const PathRecorder& recorder) {
  if (recorder.points().empty()) throw EmptyPath("no approach waypoints were recorded");
  return {recorder.points().rbegin(), recorder.points().rend()};
}

// --- config ------------------------------------------------------------------

MissionConfig MissionConfig::defaults() {
  MissionConfig c;
  c.transit.v_max = 3.0;
  c.transit.a_max = 2.5;
  c.transit.dt = 1.0;
  c.transit.margin = 0.6;

  c.scan.v_max = 0.5;
  c.scan.a_max = 1.0;
  c.scan.dt = 0.5;
  c.scan.margin = 0.6;
  c.scan.cruise_fraction = 1.0;  // exactly the 0.5 m/s scan speed

  c.approach.v_max = 1.0;
  c.approach.a_max = 2.0;
  c.approach.dt = 0.5;
  c.approach.margin = 0.6;
  return c;
}

double building_facing_yaw(const world::Scenario& scenario) {
  if (scenario.marker) return wrap_angle(scenario.marker->normal_yaw + std::numbers::pi);
  const Vec3 probe(scenario.channel_top.x(), scenario.channel_top.y(),
                   0.5 * (scenario.channel_top.z() + scenario.channel_bottom_altitude));
  double best = std::numeric_limits<double>::infinity();
  double yaw = 0.0;
  for (const auto& box : scenario.world.boxes()) {
    const Vec3 q = probe.cwiseMax(box.min).cwiseMin(box.max);
    const double d = (q - probe).norm();
    if (d < best && horizontal_distance(q, probe) > 1e-9) {
      best = d;
      yaw = std::atan2(q.y() - probe.y(), q.x() - probe.x());
    }
  }
  return yaw;
}

// --- Mission -------------------------------------------------------------------

Mission::Mission(const world::Scenario& scenario, MissionConfig cfg)
    : scenario_(scenario),
      cfg_(std::move(cfg)),
      filter_(cfg_.filter_k, cfg_.filter_k_min),
      recorder_(cfg_.waypoint_spacing),
      scan_yaw_(building_facing_yaw(scenario)) {
  planner::validate(cfg_.transit);
  planner::validate(cfg_.scan);
  planner::validate(cfg_.approach);
}

Vec3 Mission::drop_point() const {
  const double normal_yaw = scan_yaw_ + std::numbers::pi;
  const Vec3 normal(std::cos(normal_yaw), std::sin(normal_yaw), 0.0);
  return *filter_.filtered_position() + scenario_.drop_offset * normal;
}

void Mission::transition(MissionState to, const std::string& reason, double now, TickOutput& out) {
  if (!allowed_transition(state_, to))
    throw std::logic_error("illegal mission transition " + std::string(to_string(state_)) + " -> " +
                           std::string(to_string(to)));
  out.transitions.push_back({now, state_, to, reason});
  state_ = to;
  state_since_ = now;
  hold_since_.reset();
  hold_position_.reset();
}

void Mission::plan(const std::vector<Vec3>& waypoints, const MissionInputs& in, const planner::PlannerConfig& cfg) {
  // Continue from where the current trajectory is, so setpoints stay continuous.
  Vec3 start = in.state_estimate.position;
  Vec3 vel = in.velocity_estimate;
  if (spline_ && in.clock >= spline_->span_begin() && in.clock <= spline_->span_end()) {
    start = spline_->evaluate(in.clock, 0);
    vel = spline_->evaluate(in.clock, 1);
  } else if (spline_ && in.clock > spline_->span_end()) {
    start = spline_->evaluate(spline_->span_end(), 0);
    vel = Vec3::Zero();
  }
  if (vel.norm() > cfg.v_max) vel *= cfg.v_max / vel.norm();
  spline_ = planner::plan_through(start, vel, waypoints, in.clock, cfg);
  goal_ = waypoints.back();
}

bool Mission::spline_finished(double now) const { return !spline_ || now >= spline_->span_end(); }

void Mission::hold_here(const MissionInputs& in, TickOutput& out) {
  if (!hold_position_) hold_position_ = in.state_estimate.position;
  planner::Setpoint sp;
  sp.position = *hold_position_;
  sp.yaw = last_yaw_;
  sp.stamp = in.clock;
  out.setpoint = sp;
}

void Mission::follow(const MissionInputs& in, const planner::PlannerConfig& cfg, std::optional<double> yaw,
                     TickOutput& out, bool escalate) {
  const double now = in.clock;
  if (in.field && in.buffer && spline_ && goal_) {
    // Retraced paths are only re-optimized when something threatens them,
    // otherwise smoothing would pull them off the recorded path.
    const bool retrace = state_ == S::kReturn || state_ == S::kAscendAbort;
    const bool threatened =
        planner::spline_clearance(*spline_, *in.field, now, now + (cfg.opt_window + 1) * spline_->dt()) < cfg.margin;
    if (!retrace || threatened) {
      ReoptRecord rec;
      rec.stamp = now;
      try {
        const auto r = planner::reoptimize(*spline_, *in.field, *in.buffer, *goal_, now, cfg);
        spline_ = r.spline;
        rec.cost_before = r.cost_before;
        rec.cost_after = r.cost_after;
        rec.iterations = r.iterations;
        rec.restarts = r.restarts;
        rec.min_clearance = r.min_clearance;
      } catch (const planner::InfeasibleTrajectory& e) {
        rec.cost_before = e.best().cost_before;
        rec.cost_after = e.best().cost_after;
        rec.iterations = e.best().iterations;
        rec.restarts = e.best().restarts;
        rec.min_clearance = e.best().min_clearance;
        rec.feasible = false;
      }
      out.reopt = rec;
      if (!rec.feasible && escalate) {
        hold_since_ = now;
        hold_here(in, out);
        return;
      }
    }
  }
  planner::Setpoint sp;
  try {
    sp = planner::next_setpoint(*spline_, now, cfg, yaw, last_yaw_);
  } catch (const planner::OutOfSpan&) {
    sp.position = spline_->evaluate(spline_->span_end());
    sp.yaw = yaw ? wrap_angle(*yaw) : last_yaw_;
    sp.stamp = now;
  }
  out.setpoint = sp;
}

void Mission::ingest(const MissionInputs& in) {
  const bool scanning = state_ == S::kDescentScan || state_ == S::kMarkerApproach;
  if (!scanning) return;
  if ((state_ == S::kDescentScan && scan_stage_ == 1) || state_ == S::kMarkerApproach)
    recorder_.record(in.state_estimate.position);
  for (const Observation& obs : in.observations) {
    if (!obs.detection || obs.detection->position_cam.norm() > cfg_.max_detection_range) {
      filter_.miss();
      continue;
    }
    const Pose& cam = obs.camera_pose;
    filter_.add(cam.position + camera_to_world_dir(cam.yaw, obs.detection->position_cam));
    last_detection_ = obs.stamp;
  }
}

TickOutput Mission::tick(const MissionInputs& in) {
  TickOutput out;
  const double now = in.clock;
  const Vec3& est = in.state_estimate.position;
  const Vec3 top = scenario_.channel_top;
  const Vec3 cruise_above_channel(top.x(), top.y(), scenario_.cruise_altitude);
  const Vec3 cruise_above_home(scenario_.home.x(), scenario_.home.y(), scenario_.cruise_altitude);
  if (is_terminal(state_)) return out;
  ingest(in);

  // Transitions first; the setpoint below is for the state we end up in.
  switch (state_) {
    case S::kIdle:
      transition(S::kTakeoff, "start", now, out);
      last_yaw_ = in.state_estimate.yaw;
      [[fallthrough]];
    case S::kTakeoff:
      if (std::abs(est.z() - scenario_.cruise_altitude) <= cfg_.altitude_tolerance) {
        transition(S::kGpsTransit, "cruise altitude reached", now, out);
        spline_.reset();
        plan({cruise_above_channel}, in, cfg_.transit);
      }
      break;
    case S::kGpsTransit:
      if (!homebound_ && horizontal_distance(est, top) <= cfg_.channel_capture_radius) {
        transition(S::kDescentScan, "descent channel reached", now, out);
        scan_stage_ = 0;
        plan({top}, in, cfg_.transit);
      } else if (homebound_ && spline_finished(now) &&
                 horizontal_distance(est, scenario_.home) <= cfg_.channel_capture_radius) {
        transition(S::kLand, "above home", now, out);
        spline_.reset();
      }
      break;
    case S::kDescentScan:
      if (filter_.ready() && filter_.consecutive() >= cfg_.filter_k_min) {
        transition(S::kMarkerApproach, "marker detected", now, out);
        marker_at_approach_ = filter_.filtered_position();
        approach_time_ = now;
        plan({drop_point()}, in, cfg_.approach);
      } else if (scan_stage_ == 0 && (est - top).norm() <= cfg_.altitude_tolerance + 0.2) {
        scan_stage_ = 1;
        recorder_.record(est);
        plan({Vec3(top.x(), top.y(), scenario_.channel_bottom_altitude)}, in, cfg_.scan);
      } else if (scan_stage_ == 1 && est.z() <= scenario_.channel_bottom_altitude + cfg_.altitude_tolerance) {
        transition(S::kAscendAbort, "channel bottom reached without detection", now, out);
        aborted_ = true;
      }
      break;
    case S::kMarkerApproach:
      if (hold_since_) {
        if (now - *hold_since_ >= cfg_.hold_duration) {
          transition(S::kAscendAbort, "approach aborted after hold", now, out);
          aborted_ = true;
        }
      } else if ((est - drop_point()).norm() <= cfg_.arrival_tolerance) {
        transition(S::kDropOff, "drop-off point reached", now, out);
        hold_position_ = drop_point();
      } else if (last_detection_ && now - *last_detection_ > cfg_.detection_timeout) {
        hold_since_ = now;
        out.events.push_back("marker lost");
      }
      break;
    case S::kDropOff:
      if (now - state_since_ >= cfg_.dropoff_duration) {
        out.events.push_back("release");
        transition(S::kReturn, "package released", now, out);
      }
      break;
    case S::kReturn:
    case S::kAscendAbort:
      if (spline_ && goal_ && spline_finished(now) && (est - *goal_).norm() <= 0.5) {
        transition(S::kGpsTransit, "channel top reached", now, out);
        homebound_ = true;
        plan({cruise_above_channel, cruise_above_home}, in, cfg_.transit);
      }
      break;
    case S::kLand:
      if (in.landed) transition(aborted_ ? S::kFailed : S::kDone, "landed", now, out);
      break;
    case S::kFailed:
    case S::kDone:
      break;
  }

  // Entering the retrace states plans the reversed path once.
  if (!out.transitions.empty()) {
    const MissionState entered = out.transitions.back().to;
    if (entered == S::kReturn || entered == S::kAscendAbort) {
      std::vector<Vec3> wps;
      if (!recorder_.points().empty()) wps = record_and_reverse_path(recorder_);
      wps.push_back(top);
      plan(wps, in, cfg_.approach);
    }
  }

  switch (state_) {
    case S::kTakeoff:
    case S::kLand: {
      planner::Setpoint sp;
      const Vec3& xy = scenario_.home;
      sp.position = Vec3(xy.x(), xy.y(), state_ == S::kTakeoff ? scenario_.cruise_altitude : 0.0);
      sp.yaw = last_yaw_;
      sp.stamp = now;
      out.setpoint = sp;
      out.vertical_only = true;
      break;
    }
    case S::kGpsTransit:
      follow(in, cfg_.transit, std::nullopt, out, false);
      break;
    case S::kDescentScan:
      follow(in, scan_stage_ == 0 ? cfg_.transit : cfg_.scan, scan_yaw_, out, false);
      break;
    case S::kMarkerApproach:
      if (hold_since_) {
        hold_here(in, out);
        break;
      }
      if (goal_ && (drop_point() - *goal_).norm() > cfg_.replan_goal_shift) plan({drop_point()}, in, cfg_.approach);
      follow(in, cfg_.approach, scan_yaw_, out, true);
      break;
    case S::kDropOff:
      hold_here(in, out);
      out.setpoint->yaw = scan_yaw_;
      break;
    case S::kReturn:
    case S::kAscendAbort:
      follow(in, cfg_.approach, scan_yaw_, out, false);
      break;
    default:
      break;
  }
  if (out.setpoint) last_yaw_ = out.setpoint->yaw;
  return out;
}

}  // namespace lastmile::mission
