#pragma once

#include "lastmile/planner.hpp"
#include "lastmile/types.hpp"

namespace lastmile::autopilot {

inline constexpr double kKp = 2.0;
inline constexpr double kKd = 3.0;
inline constexpr double kLandedAltitude = 0.05;

struct DroneState {
  Vec3 position = Vec3::Zero();  // WORLD truth
  Vec3 velocity = Vec3::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
};

struct Limits {
  double v_max = 3.0;
  double a_max = 2.5;
  double yaw_rate_max = 1.0;
  double v_phys_max = 5.0;  // hard clamp regardless of v_max
};

/// PD position control on a double integrator, symplectic Euler. The ground
/// plane z = 0 is solid. Throws std::invalid_argument unless dt is in (0, 0.1].
DroneState step(const DroneState& state, const planner::Setpoint& setpoint, double dt, const Limits& limits);

/// Vertical-only tracking of target_altitude, holding x, y and yaw.
DroneState takeoff_land(const DroneState& state, double target_altitude, double dt, const Limits& limits);

inline bool landed(const DroneState& state, double target_altitude) {
  return target_altitude == 0.0 && state.position.z() <= kLandedAltitude;
}

}  // namespace lastmile::autopilot
