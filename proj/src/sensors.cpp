#include "lastmile/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace lastmile::sensors {
namespace {

struct MarkerHit {
  double t;
  double radial;
  bool on_sheet;
};

struct SheetFrame {
  Vec3 center, normal, tangent;
};

// Intersection with the printed sheet, seen from its front side.
std::optional<MarkerHit> hit_marker(const SheetFrame& m, const Vec3& origin, const Vec3& dir) {
  const double denom = dir.dot(m.normal);
  if (denom >= 0.0) return std::nullopt;
  const double t = (m.center - origin).dot(m.normal) / denom;
  if (!(t > 0.0)) return std::nullopt;
  const Vec3 rel = origin + t * dir - m.center;
  const double u = rel.dot(m.tangent);
  const double w = rel.z();
  const bool on_sheet =
      std::abs(u) <= 0.5 * world::kSheetWidth && std::abs(w) <= 0.5 * world::kSheetHeight;
  return MarkerHit{t, std::hypot(u, w), on_sheet};
}

void write_all(const std::filesystem::path& path, const std::string& header,
               const char* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header;
  out.write(data, static_cast<std::streamsize>(size));
}

}  // namespace

Vec3 pixel_ray_camera(const CameraIntrinsics& intr, double u, double v) {
  return Vec3((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
}

DepthImage render_depth(const world::VoxelWorld& world, const Pose& camera_pose,
                        const CameraIntrinsics& intr, double max_range, Rng& rng,
                        double depth_noise_sigma) {
  DepthImage img;
  img.width = intr.width;
  img.height = intr.height;
  img.intrinsics = intr;
  img.pose_at_capture = camera_pose;
  img.max_range = max_range;
  img.depths.assign(static_cast<std::size_t>(intr.width) * intr.height, kNoReturn);

  const double cy = std::cos(camera_pose.yaw), sy = std::sin(camera_pose.yaw);
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 d_cam = pixel_ray_camera(intr, u, v);
      const double len = d_cam.norm();
      const Vec3 dir = camera_to_world_dir(cy, sy, d_cam / len);
      // A z-depth of max_range corresponds to a longer Euclidean ray off-axis.
      const auto t = world::ray_intersect(world, camera_pose.position, dir, max_range * len);
      if (!t) continue;
      double z = *t / len;
      if (z > max_range) continue;
      if (depth_noise_sigma > 0.0) {
        z += depth_noise_sigma * standard_normal(rng);
        z = std::clamp(z, 1e-3, max_range);
      }
      img.depths[static_cast<std::size_t>(v) * intr.width + u] = z;
    }
  }
  return img;
}

GrayImage render_marker_view(const world::VoxelWorld& world,
                             const std::optional<world::MarkerSpec>& marker,
                             const Pose& camera_pose, const CameraIntrinsics& intr) {
  GrayImage img(intr.width, intr.height, kSkyLuminance);
  const double r_in = marker ? 0.5 * marker->inner_diameter : 0.0;
  const double r_out = marker ? 0.5 * marker->outer_diameter : 0.0;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  const double cy = std::cos(camera_pose.yaw), sy = std::sin(camera_pose.yaw);
  SheetFrame sheet;
  if (marker) sheet = {marker->center, marker->normal(), marker->tangent()};
  // Rays are left unnormalized; box and sheet hits share the same parameter.
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 dir = camera_to_world_dir(cy, sy, pixel_ray_camera(intr, u, v));
      const auto t_box = world.boxes().empty()
                             ? std::nullopt
                             : world::ray_intersect(world, camera_pose.position, dir, kInf);
      std::uint8_t value = t_box ? kSurfaceLuminance : kSkyLuminance;
      if (marker) {
        const auto mh = hit_marker(sheet, camera_pose.position, dir);
        // The sheet lies on the wall surface, so it wins ties with its own wall.
        if (mh && mh->on_sheet && (!t_box || mh->t <= *t_box * (1.0 + 1e-9) + 1e-9))
          value = (mh->radial >= r_in && mh->radial <= r_out) ? kBlack : kWhite;
      }
      img.at(u, v) = value;
    }
  }
  return img;
}

GpsFix GpsSensor::measure(const Vec3& true_pos) {
  GpsFix fix;
  const Vec3 noise(standard_normal(rng_), standard_normal(rng_), standard_normal(rng_));
  fix.position = true_pos + noise_.gps_sigma_open * noise;
  if (true_pos.z() > rooftop_height_) {
    bias_.reset();
    fix.degraded = false;
    return fix;
  }
  if (!bias_) {
    Vec3 dir(standard_normal(rng_), standard_normal(rng_), standard_normal(rng_));
    if (dir.norm() < 1e-12) dir = Vec3::UnitX();
    const double magnitude = uniform(rng_, 1.0, std::max(1.0, noise_.gps_bias_urban_max));
    bias_ = dir.normalized() * magnitude;
  }
  fix.position += *bias_;
  fix.degraded = true;
  return fix;
}

OdomEstimate vo_step(const OdomEstimate& prev, const Vec3& true_delta, double true_yaw_delta,
                     const NoiseParams& noise, Rng& rng) {
  OdomEstimate next = prev;
  const double sigma = noise.vo_drift_per_meter * true_delta.norm();
  Vec3 walk = Vec3::Zero();
  if (sigma > 0.0) walk = sigma * Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng));
  next.position = prev.position + true_delta + walk;
  next.yaw = wrap_angle(prev.yaw + true_yaw_delta);
  next.accumulated_drift = prev.accumulated_drift + walk;
  return next;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  write_all(path, header, reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
}

void write_depth_pgm(const std::filesystem::path& path, const DepthImage& image) {
  std::vector<char> data;
  data.reserve(image.depths.size() * 2);
  for (double d : image.depths) {
    const auto mm = std::isfinite(d)
                        ? static_cast<std::uint16_t>(std::clamp(std::lround(d * 1000.0), 0L, 65535L))
                        : std::uint16_t{0};
    data.push_back(static_cast<char>(mm >> 8));
    data.push_back(static_cast<char>(mm & 0xff));
  }
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
  write_all(path, header, data.data(), data.size());
}

}  // namespace lastmile::sensors
