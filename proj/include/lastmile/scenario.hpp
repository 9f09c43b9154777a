#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "lastmile/types.hpp"
#include "lastmile/world.hpp"

namespace lastmile {

namespace sensors {

struct NoiseParams {
  double gps_sigma_open = 0.5;
  double gps_bias_urban_max = 5.0;
  double vo_drift_per_meter = 0.01;
  double depth_noise_sigma = 0.0;
};

}  // namespace sensors

namespace world {

// Printed A4 sheet (portrait) carrying the marker.
inline constexpr double kSheetWidth = 0.210;
inline constexpr double kSheetHeight = 0.297;
inline constexpr double kMaxOuterDiameter = 0.19;

/// Annulus marker mounted on a vertical surface. normal_yaw is the heading of
/// the outward normal.
struct MarkerSpec {
  Vec3 center = Vec3::Zero();
  double normal_yaw = 0.0;
  double outer_diameter = 0.18;
  double inner_diameter = 0.09;

  Vec3 normal() const { return Vec3(std::cos(normal_yaw), std::sin(normal_yaw), 0.0); }
  /// In-plane horizontal axis (normal rotated +90 degrees about z).
  Vec3 tangent() const { return Vec3(-std::sin(normal_yaw), std::cos(normal_yaw), 0.0); }
};

void validate(const MarkerSpec& marker);

struct Cameras {
  CameraIntrinsics front{640, 480, 457.0, 457.0, 319.5, 239.5};
  CameraIntrinsics front_depth{96, 72, 68.55, 68.55, 47.5, 35.5};
};

struct Scenario {
  VoxelWorld world;
  std::optional<MarkerSpec> marker;
  Vec3 home = Vec3::Zero();
  double cruise_altitude = 30.0;
  double rooftop_height = 20.0;
  Vec3 channel_top = Vec3::Zero();
  double channel_bottom_altitude = 0.0;
  double drop_offset = 1.2;
  double drone_radius = 0.4;
  sensors::NoiseParams noise;
  Cameras cameras;
  std::uint64_t seed = 0;
};

class ScenarioError : public std::runtime_error {
 public:
  enum class Kind { kIo, kParse, kInvariant };
  ScenarioError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Checks every Scenario invariant, including descent-channel clearance.
/// Throws ScenarioError(kInvariant) naming the violated invariant.
void validate(const Scenario& scenario);

/// Minimum distance between the vertical descent channel segment and any box.
double channel_clearance(const Scenario& scenario);

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace world
}  // namespace lastmile
