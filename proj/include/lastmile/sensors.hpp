#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "lastmile/rng.hpp"
#include "lastmile/scenario.hpp"
#include "lastmile/types.hpp"
#include "lastmile/world.hpp"

namespace lastmile::sensors {

inline constexpr double kNoReturn = std::numeric_limits<double>::infinity();

inline constexpr std::uint8_t kSkyLuminance = 200;
inline constexpr std::uint8_t kSurfaceLuminance = 128;
inline constexpr std::uint8_t kWhite = 255;
inline constexpr std::uint8_t kBlack = 0;

/// Planar z-depth image; pixels without a return hold kNoReturn.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depths;
  CameraIntrinsics intrinsics;
  Pose pose_at_capture;
  double max_range = 10.0;

  double at(int u, int v) const { return depths[static_cast<std::size_t>(v) * width + u]; }
  bool has_return(int u, int v) const { return std::isfinite(at(u, v)); }
};

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = kWhite)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
  std::uint8_t& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
};

struct GpsFix {
  Vec3 position = Vec3::Zero();
  bool degraded = false;
};

struct OdomEstimate {
  Vec3 position = Vec3::Zero();  // ODOM frame
  double yaw = 0.0;
  Vec3 accumulated_drift = Vec3::Zero();  // estimate minus truth; test-visible only
};

/// Unit world-frame ray through the center of pixel (u, v), plus the
/// camera-frame direction with unit z used for z-depth conversion.
Vec3 pixel_ray_camera(const CameraIntrinsics& intr, double u, double v);

DepthImage render_depth(const world::VoxelWorld& world, const Pose& camera_pose,
                        const CameraIntrinsics& intr, double max_range, Rng& rng,
                        double depth_noise_sigma = 0.0);

GrayImage render_marker_view(const world::VoxelWorld& world,
                             const std::optional<world::MarkerSpec>& marker,
                             const Pose& camera_pose, const CameraIntrinsics& intr);

/// GPS with multipath below the rooftops: a bias vector is drawn once each time
/// the drone drops below rooftop_height and held until it climbs back out.
class GpsSensor {
 public:
  GpsSensor(NoiseParams noise, double rooftop_height, Rng rng)
      : noise_(noise), rooftop_height_(rooftop_height), rng_(std::move(rng)) {}

  GpsFix measure(const Vec3& true_pos);
  const std::optional<Vec3>& current_bias() const { return bias_; }

 private:
  NoiseParams noise_;
  double rooftop_height_;
  Rng rng_;
  std::optional<Vec3> bias_;
};

OdomEstimate vo_step(const OdomEstimate& prev, const Vec3& true_delta, double true_yaw_delta,
                     const NoiseParams& noise, Rng& rng);

void write_pgm(const std::filesystem::path& path, const GrayImage& image);
/// 16-bit big-endian PGM in millimeters, 0 for no return.
void write_depth_pgm(const std::filesystem::path& path, const DepthImage& image);

}  // namespace lastmile::sensors
