#pragma once

#include <cmath>
#include <numbers>
#include <string_view>

#include <Eigen/Core>

namespace lastmile {

// East-North-Up world frame, meters.
using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;

enum class Frame { kWorld, kOdom, kBody, kCamFront };

std::string_view to_string(Frame frame);

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w - std::numbers::pi;
}

inline bool all_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Yaw-only pose. Roll and pitch are always zero in this kinematic model.
struct Pose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  Frame frame = Frame::kWorld;
};

struct CameraIntrinsics {
  int width = 640;
  int height = 480;
  double fx = 457.0;
  double fy = 457.0;
  double cx = 319.5;
  double cy = 239.5;
};

// Throws std::invalid_argument if the intrinsics violate their invariants.
void validate(const CameraIntrinsics& intr);

/// Camera frame: +z along the optical axis, +x right, +y down. The front
/// camera sits at the body origin looking along body +x with zero pitch.
Vec3 camera_to_world_dir(double yaw, const Vec3& v_cam);
inline Vec3 camera_to_world_dir(double cos_yaw, double sin_yaw, const Vec3& v) {
  return Vec3(sin_yaw * v.x() + cos_yaw * v.z(), -cos_yaw * v.x() + sin_yaw * v.z(), -v.y());
}
Vec3 world_to_camera_dir(double yaw, const Vec3& v_world);

}  // namespace lastmile
