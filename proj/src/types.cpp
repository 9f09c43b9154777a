#include "lastmile/types.hpp"

#include <stdexcept>

namespace lastmile {

std::string_view to_string(Frame frame) {
  switch (frame) {
    case Frame::kWorld: return "WORLD";
    case Frame::kOdom: return "ODOM";
    case Frame::kBody: return "BODY";
    case Frame::kCamFront: return "CAM_FRONT";
  }
  return "?";
}

void validate(const CameraIntrinsics& intr) {
  if (intr.width <= 0 || intr.height <= 0)
    throw std::invalid_argument("camera: width and height must be positive");
  if (!(intr.fx > 0.0) || !(intr.fy > 0.0))
    throw std::invalid_argument("camera: fx and fy must be positive");
  if (!(intr.cx > 0.0 && intr.cx < intr.width) || !(intr.cy > 0.0 && intr.cy < intr.height))
    throw std::invalid_argument("camera: principal point must lie inside the image");
}

Vec3 camera_to_world_dir(double yaw, const Vec3& v) {
  // columns: cam x -> (s, -c, 0), cam y -> (0, 0, -1), cam z -> (c, s, 0)
  return camera_to_world_dir(std::cos(yaw), std::sin(yaw), v);
}

Vec3 world_to_camera_dir(double yaw, const Vec3& w) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return Vec3(s * w.x() - c * w.y(), -w.z(), c * w.x() + s * w.y());
}

}  // namespace lastmile
