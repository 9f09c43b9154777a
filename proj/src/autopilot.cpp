#include "lastmile/autopilot.hpp"

#include <algorithm>
#include <stdexcept>

namespace lastmile::autopilot {
namespace {

Vec3 clamp_norm(const Vec3& v, double max_norm) {
  const double n = v.norm();
  return n > max_norm ? Vec3(v * (max_norm / n)) : v;
}

}  // namespace

DroneState step(const DroneState& state, const planner::Setpoint& setpoint, double dt, const Limits& limits) {
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("autopilot dt must be in (0, 0.1]");
  DroneState next = state;
  const Vec3 a = clamp_norm(kKp * (setpoint.position - state.position) - kKd * state.velocity, limits.a_max);
  next.velocity = clamp_norm(state.velocity + a * dt, std::min(limits.v_max, limits.v_phys_max));
  next.position = state.position + next.velocity * dt;
  if (next.position.z() < 0.0) {
    next.position.z() = 0.0;
    next.velocity.z() = std::max(0.0, next.velocity.z());
  }
  const double max_turn = limits.yaw_rate_max * dt;
  const double turn = std::clamp(wrap_angle(setpoint.yaw - state.yaw), -max_turn, max_turn);
  next.yaw = turn == 0.0 ? state.yaw : wrap_angle(state.yaw + turn);
  next.yaw_rate = turn / dt;
  return next;
}

DroneState takeoff_land(const DroneState& state, double target_altitude, double dt, const Limits& limits) {
  if (!(target_altitude >= 0.0)) throw std::invalid_argument("target altitude must be >= 0");
  if (landed(state, target_altitude)) return state;
  planner::Setpoint sp;
  sp.position = Vec3(state.position.x(), state.position.y(), target_altitude);
  sp.yaw = state.yaw;
  return step(state, sp, dt, limits);
}

}  // namespace lastmile::autopilot
