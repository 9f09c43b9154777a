#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "lastmile/marker_tracker.hpp"
#include "lastmile/sim.hpp"

namespace lastmile::cli {

std::vector<SweepCamera> default_sweep_cameras() {
  // 1080p keeps the vertical FOV of the 640x480 camera with square pixels.
  const double fy_hd = 457.0 * 1080.0 / 480.0;
  return {
      {"640x480", CameraIntrinsics{640, 480, 457.0, 457.0, 319.5, 239.5}},
      {"1920x1080", CameraIntrinsics{1920, 1080, fy_hd, fy_hd, 959.5, 539.5}},
  };
}

sensors::GrayImage render_axis_view(const CameraIntrinsics& intr, const world::MarkerSpec& spec, double distance,
                                    double tilt) {
  world::MarkerSpec m = spec;
  m.center = Vec3(distance, 0.0, 0.0);
  m.normal_yaw = std::numbers::pi + tilt;
  const Pose camera{Vec3::Zero(), 0.0, Frame::kWorld};
  return sensors::render_marker_view(world::VoxelWorld{}, m, camera, intr);
}

SweepResult sweep_detection(const SweepOptions& options) {
  if (options.step <= 0.0 || options.start <= 0.0 || options.stop < options.start)
    throw std::invalid_argument("invalid sweep distances");
  const world::MarkerSpec spec;
  SweepResult result;
  for (const SweepCamera& cam : options.cameras) {
    validate(cam.intrinsics);
    SweepSummary summary;
    summary.camera = cam.name;
    double latency_sum = 0.0;
    int frames = 0;
    int misses = 0;
    bool contiguous = true;
    const int count = static_cast<int>(std::floor((options.stop - options.start) / options.step + 1e-9)) + 1;
    for (int i = 0; i < count && misses < options.misses_to_stop; ++i) {
      const double d = options.start + i * options.step;
      SweepRow row;
      row.camera = cam.name;
      row.distance = d;
      const sensors::GrayImage img = render_axis_view(cam.intrinsics, spec, d, options.tilt);
      const marker::TimedDetection td = marker::detect_timed(img, cam.intrinsics, spec);
      row.latency_ms = td.elapsed_ms;
      latency_sum += td.elapsed_ms;
      ++frames;
      summary.max_latency_ms = std::max(summary.max_latency_ms, td.elapsed_ms);
      if (td.detection) {
        row.detected = true;
        row.range_estimate = td.detection->position_cam.z();
        row.relative_error = std::abs(row.range_estimate - d) / d;
      }
      const double outer_px = cam.intrinsics.fy * 0.5 * spec.outer_diameter / d;
      if (!row.detected && outer_px > std::min(cam.intrinsics.cx, cam.intrinsics.cy))
        row.note = "below_min_range";
      if (row.detected) {
        misses = 0;
        if (contiguous) {
          summary.max_distance = d;
          summary.max_relative_error = std::max(summary.max_relative_error, row.relative_error);
        }
      } else {
        ++misses;
        contiguous = false;
      }
      result.rows.push_back(row);
    }
    summary.avg_latency_ms = frames > 0 ? latency_sum / frames : 0.0;
    result.summaries.push_back(summary);
  }
  return result;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "camera,distance,detected,range_estimate,relative_error,latency_ms,note\n";
  out.precision(10);
  for (const SweepRow& r : result.rows) {
    out << r.camera << ',' << r.distance << ',' << (r.detected ? 1 : 0) << ',' << r.range_estimate << ','
        << r.relative_error << ',' << r.latency_ms << ',' << r.note << '\n';
  }
}

}  // namespace lastmile::cli
