#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lastmile/autopilot.hpp"
#include "lastmile/mission.hpp"
#include "lastmile/scenario.hpp"
#include "lastmile/types.hpp"

namespace lastmile::cli {

enum class Outcome { kDone, kFailed, kCrashed, kTimeout };

std::string_view to_string(Outcome o);
/// 0 DONE, 2 FAILED, 3 CRASHED, 4 TIMEOUT.
int exit_code(Outcome o);

struct LatencyStats {
  double avg = 0.0;
  double max = 0.0;
  int frames = 0;
};

struct MetricsReport {
  Outcome outcome = Outcome::kTimeout;
  std::uint64_t seed = 0;
  std::optional<double> time_to_detection;
  double time_total = 0.0;
  double min_true_clearance = 0.0;
  double path_length = 0.0;
  std::optional<double> marker_estimate_error;
  LatencyStats detection_latency_ms;
  int setpoint_count = 0;
  // Max distance of the RETURN ground-truth path from the inbound
  // (descent + approach) ground-truth path.
  std::optional<double> return_path_deviation;
  std::vector<mission::Transition> transitions;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  // Empty: nothing is written to disk.
  std::filesystem::path out_dir;
  bool dump_images = false;
  double max_sim_time = 300.0;
  int truth_every = 1;  // truth record decimation, in physics steps
};

inline constexpr int kPhysicsRate = 50;
inline constexpr double kPhysicsDt = 1.0 / kPhysicsRate;
inline constexpr int kCameraEvery = 5;    // 10 Hz
inline constexpr int kGpsEvery = 10;      // 5 Hz
inline constexpr int kMissionEvery = 25;  // 2 Hz
inline constexpr double kDepthRange = 10.0;
inline constexpr double kFieldDmax = 2.0;

autopilot::Limits default_limits();

/// Fixed-step closed-loop simulation. Writes trace.jsonl and metrics.json
/// (and images/ with dump_images) when out_dir is set.
MetricsReport run(const world::Scenario& scenario, const RunOptions& options);

std::string metrics_json(const MetricsReport& report);

// --- detection sweep ---------------------------------------------------------

struct SweepCamera {
  std::string name;
  CameraIntrinsics intrinsics;
};

/// 640x480 (fx 457) and 1920x1080 with square pixels and the same vertical FOV.
std::vector<SweepCamera> default_sweep_cameras();

struct SweepRow {
  std::string camera;
  double distance = 0.0;
  bool detected = false;
  double range_estimate = 0.0;
  double relative_error = 0.0;
  double latency_ms = 0.0;
  std::string note;  // "below_min_range" when the marker cannot fit the frame
};

struct SweepSummary {
  std::string camera;
  double max_distance = 0.0;  // last distance of the contiguous detected run from the start
  double avg_latency_ms = 0.0;
  double max_latency_ms = 0.0;
  double max_relative_error = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summaries;
};

struct SweepOptions {
  std::vector<SweepCamera> cameras = default_sweep_cameras();
  double start = 3.0;
  double step = 0.05;
  double stop = 40.0;
  double tilt = 0.0;  // radians, marker rotated about the vertical
  int misses_to_stop = 3;  // consecutive misses that end a camera's sweep
};

/// Renders the marker on the optical axis at each distance and runs the detector.
SweepResult sweep_detection(const SweepOptions& options);
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);

/// Single rendered frame with the marker `distance` ahead on the optical axis.
sensors::GrayImage render_axis_view(const CameraIntrinsics& intr, const world::MarkerSpec& spec, double distance,
                                    double tilt);

// --- plotting ----------------------------------------------------------------

/// SVG with a top-down path, altitude profile and clearance timeline from a trace.
std::string plot_trace_svg(const std::filesystem::path& trace_path);

}  // namespace lastmile::cli
