#include "lastmile/sim.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lastmile/mapping.hpp"
#include "lastmile/marker_tracker.hpp"
#include "lastmile/rng.hpp"
#include "lastmile/sensors.hpp"

namespace lastmile::cli {

namespace {

using ojson = nlohmann::ordered_json;
using mission::MissionState;

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path) {
    if (path.empty()) return;
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot open trace file: " + path.string());
  }
  bool enabled() const { return out_.is_open(); }
  void write(const ojson& record) {
    if (enabled()) out_ << record.dump() << '\n';
  }

 private:
  std::ofstream out_;
};

ojson record(const char* type, double t) {
  ojson r;
  r["type"] = type;
  r["t"] = t;
  return r;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

double polyline_distance(const Vec3& p, const std::vector<Vec3>& line) {
  if (line.size() == 1) return (p - line.front()).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  return best;
}

std::string frame_name(const char* prefix, long n, const char* ext) {
  std::ostringstream s;
  s << prefix << std::setw(6) << std::setfill('0') << n << ext;
  return s.str();
}

}  // namespace

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kDone: return "DONE";
    case Outcome::kFailed: return "FAILED";
    case Outcome::kCrashed: return "CRASHED";
    case Outcome::kTimeout: return "TIMEOUT";
  }
  return "?";
}

int exit_code(Outcome o) {
  switch (o) {
    case Outcome::kDone: return 0;
    case Outcome::kFailed: return 2;
    case Outcome::kCrashed: return 3;
    case Outcome::kTimeout: return 4;
  }
  return 1;
}

autopilot::Limits default_limits() { return autopilot::Limits{}; }

MetricsReport run(const world::Scenario& scenario, const RunOptions& options) {
  world::validate(scenario);
  if (options.max_sim_time <= 0.0) throw std::invalid_argument("max_sim_time must be positive");
  if (options.truth_every < 1) throw std::invalid_argument("truth_every must be >= 1");

  MetricsReport report;
  report.seed = options.seed.value_or(scenario.seed);

  const bool write_files = !options.out_dir.empty();
  if (write_files) std::filesystem::create_directories(options.out_dir);
  const std::filesystem::path image_dir = options.out_dir / "images";
  if (write_files && options.dump_images) std::filesystem::create_directories(image_dir);
  TraceWriter trace(write_files ? options.out_dir / "trace.jsonl" : std::filesystem::path{});

  Rng vo_rng = make_stream(report.seed, "vo");
  Rng depth_rng = make_stream(report.seed, "depth");
  sensors::GpsSensor gps(scenario.noise, scenario.rooftop_height, make_stream(report.seed, "gps"));

  const autopilot::Limits limits = default_limits();
  const world::MarkerSpec spec = scenario.marker.value_or(world::MarkerSpec{});
  const CameraIntrinsics& front = scenario.cameras.front;
  const CameraIntrinsics& depth_cam = scenario.cameras.front_depth;

  autopilot::DroneState truth;
  truth.position = scenario.home;
  truth.yaw = 0.0;

  sensors::OdomEstimate odom;  // ODOM origin at the takeoff point
  odom.yaw = truth.yaw;
  mission::FusionMemory fusion;
  fusion.offset = scenario.home;  // the launch site is surveyed
  Pose estimate{scenario.home, truth.yaw, Frame::kWorld};

  mission::Mission mission(scenario);
  mapping::OccupancyRingBuffer buffer(64, 0.2, scenario.home);
  mapping::DistanceField field = mapping::compute_distance_field(buffer, kFieldDmax);

  std::optional<planner::Setpoint> setpoint;
  bool vertical_only = false;
  std::vector<mission::Observation> observations;
  Vec3 last_tick_estimate = estimate.position;
  double latency_sum = 0.0;

  std::vector<Vec3> inbound_truth;
  std::vector<Vec3> return_truth;

  report.min_true_clearance = world::clearance(scenario.world, truth.position);
  const long max_steps = std::lround(options.max_sim_time / kPhysicsDt);
  bool finished = false;

  for (long n = 0; n < max_steps && !finished; ++n) {
    const double t = static_cast<double>(n) / kPhysicsRate;  // exact on the 2 Hz grid

    std::optional<sensors::GpsFix> fix;
    if (n % kGpsEvery == 0) fix = gps.measure(truth.position);
    estimate = mission::fuse_state(fix, odom, scenario.rooftop_height, fusion);

    if (n % kCameraEvery == 0) {
      const Pose camera_truth{truth.position, truth.yaw, Frame::kWorld};
      const sensors::DepthImage depth = sensors::render_depth(scenario.world, camera_truth, depth_cam, kDepthRange,
                                                              depth_rng, scenario.noise.depth_noise_sigma);
      buffer.move_volume(estimate.position);
      mapping::insert_depth(buffer, estimate, depth, kDepthRange);
      const MissionState s = mission.state();
      const bool scanning = s == MissionState::kDescentScan || s == MissionState::kMarkerApproach;
      if (options.dump_images && write_files) {
        sensors::write_depth_pgm(image_dir / frame_name("depth_", n / kCameraEvery, ".pgm"), depth);
      }
      if (scanning) {
        const sensors::GrayImage frame = sensors::render_marker_view(scenario.world, scenario.marker, camera_truth, front);
        const marker::TimedDetection td = marker::detect_timed(frame, front, spec);
        latency_sum += td.elapsed_ms;
        report.detection_latency_ms.max = std::max(report.detection_latency_ms.max, td.elapsed_ms);
        ++report.detection_latency_ms.frames;
        observations.push_back({t, td.detection, estimate});
        if (td.detection) {
          const marker::MarkerDetection& d = *td.detection;
          ojson r = record("detection", t);
          r["u"] = d.ellipse.center_u;
          r["v"] = d.ellipse.center_v;
          r["semi_major_px"] = d.ellipse.semi_major_px;
          r["semi_minor_px"] = d.ellipse.semi_minor_px;
          r["range"] = d.position_cam.norm();
          r["position"] = vec_json(estimate.position + camera_to_world_dir(estimate.yaw, d.position_cam));
          trace.write(r);
        }
        if (options.dump_images && write_files) {
          sensors::write_pgm(image_dir / frame_name("marker_", n / kCameraEvery, ".pgm"), frame);
        }
      }
    }

    if (n % kMissionEvery == 0) {
      field = mapping::compute_distance_field(buffer, kFieldDmax);
      mission::MissionInputs in;
      in.clock = t;
      in.state_estimate = estimate;
      in.velocity_estimate = n == 0 ? Vec3::Zero() : Vec3((estimate.position - last_tick_estimate) /
                                                           (kMissionEvery * kPhysicsDt));
      in.observations = std::move(observations);
      observations.clear();
      in.landed = truth.position.z() <= autopilot::kLandedAltitude;
      in.field = &field;
      in.buffer = &buffer;
      last_tick_estimate = estimate.position;

      const mission::TickOutput out = mission.tick(in);
      for (const mission::Transition& tr : out.transitions) {
        report.transitions.push_back(tr);
        ojson r = record("transition", tr.stamp);
        r["from"] = mission::to_string(tr.from);
        r["to"] = mission::to_string(tr.to);
        r["reason"] = tr.reason;
        trace.write(r);
        if (tr.to == MissionState::kMarkerApproach && mission.marker_at_approach()) {
          report.time_to_detection = tr.stamp;
          if (scenario.marker)
            report.marker_estimate_error = (*mission.marker_at_approach() - scenario.marker->center).norm();
        }
      }
      if (out.reopt) {
        ojson r = record("reopt", out.reopt->stamp);
        r["cost_before"] = out.reopt->cost_before;
        r["cost_after"] = out.reopt->cost_after;
        r["iterations"] = out.reopt->iterations;
        r["restarts"] = out.reopt->restarts;
        r["min_clearance"] = out.reopt->min_clearance;
        r["feasible"] = out.reopt->feasible;
        trace.write(r);
      }
      for (const std::string& e : out.events) {
        ojson r = record("event", t);
        r["name"] = e;
        trace.write(r);
      }
      if (out.setpoint) {
        setpoint = out.setpoint;
        vertical_only = out.vertical_only;
        ++report.setpoint_count;
        ojson r = record("setpoint", t);
        r["position"] = vec_json(setpoint->position);
        r["yaw"] = setpoint->yaw;
        r["state"] = mission::to_string(mission.state());
        trace.write(r);
      }
      if (options.dump_images && write_files && (n / kMissionEvery) % 20 == 0) {
        mapping::write_occupied_csv(image_dir / frame_name("occupied_", n / kMissionEvery, ".csv"), buffer);
      }
      if (mission.state() == MissionState::kDone) {
        report.outcome = Outcome::kDone;
        finished = true;
      } else if (mission.state() == MissionState::kFailed) {
        report.outcome = Outcome::kFailed;
        finished = true;
      }
      if (finished) {
        report.time_total = t;
        break;
      }
    }

    // Physics. The controller tracks the setpoint relative to what it believes.
    const autopilot::DroneState before = truth;
    if (setpoint) {
      const Vec3 correction = truth.position - estimate.position;
      if (vertical_only) {
        // Landing descends to touchdown; the estimate's altitude error must not leave it hovering.
        const double target =
            setpoint->position.z() <= 0.0 ? 0.0 : std::max(0.0, setpoint->position.z() + correction.z());
        truth = autopilot::takeoff_land(truth, target, kPhysicsDt, limits);
      } else {
        planner::Setpoint sp = *setpoint;
        sp.position += correction;
        truth = autopilot::step(truth, sp, kPhysicsDt, limits);
      }
    }
    const Vec3 delta = truth.position - before.position;
    report.path_length += delta.norm();
    odom = sensors::vo_step(odom, delta, wrap_angle(truth.yaw - before.yaw), scenario.noise, vo_rng);

    const MissionState s = mission.state();
    if (s == MissionState::kDescentScan || s == MissionState::kMarkerApproach) inbound_truth.push_back(truth.position);
    if (s == MissionState::kReturn) return_truth.push_back(truth.position);

    const double clearance = world::clearance(scenario.world, truth.position);
    report.min_true_clearance = std::min(report.min_true_clearance, clearance);
    const double t_next = static_cast<double>(n + 1) / kPhysicsRate;
    if ((n + 1) % options.truth_every == 0) {
      ojson r = record("truth", t_next);
      r["position"] = vec_json(truth.position);
      r["velocity"] = vec_json(truth.velocity);
      r["yaw"] = truth.yaw;
      r["estimate"] = vec_json(estimate.position);
      r["clearance"] = clearance;
      r["state"] = mission::to_string(s);
      trace.write(r);
    }
    if (clearance < scenario.drone_radius) {
      report.outcome = Outcome::kCrashed;
      report.time_total = t_next;
      finished = true;
      ojson r = record("event", t_next);
      r["name"] = "crash";
      trace.write(r);
    }
  }
  if (!finished) {
    report.outcome = Outcome::kTimeout;
    report.time_total = static_cast<double>(max_steps) / kPhysicsRate;
  }

  if (report.detection_latency_ms.frames > 0) report.detection_latency_ms.avg = latency_sum / report.detection_latency_ms.frames;
  if (!return_truth.empty() && !inbound_truth.empty()) {
    double worst = 0.0;
    for (const Vec3& p : return_truth) worst = std::max(worst, polyline_distance(p, inbound_truth));
    report.return_path_deviation = worst;
  }

  if (write_files) {
    std::ofstream m(options.out_dir / "metrics.json");
    if (!m) throw std::runtime_error("cannot write metrics.json");
    m << metrics_json(report) << '\n';
  }
  return report;
}

std::string metrics_json(const MetricsReport& report) {
  ojson j;
  j["outcome"] = to_string(report.outcome);
  j["seed"] = report.seed;
  j["time_to_detection"] = report.time_to_detection ? ojson(*report.time_to_detection) : ojson(nullptr);
  j["time_total"] = report.time_total;
  j["min_true_clearance"] = report.min_true_clearance;
  j["path_length"] = report.path_length;
  j["marker_estimate_error"] = report.marker_estimate_error ? ojson(*report.marker_estimate_error) : ojson(nullptr);
  j["detection_latency_ms"] = {{"avg", report.detection_latency_ms.avg},
                               {"max", report.detection_latency_ms.max},
                               {"frames", report.detection_latency_ms.frames}};
  j["setpoint_count"] = report.setpoint_count;
  j["return_path_deviation"] =
      report.return_path_deviation ? ojson(*report.return_path_deviation) : ojson(nullptr);
  ojson transitions = ojson::array();
  for (const mission::Transition& tr : report.transitions)
    transitions.push_back({{"t", tr.stamp}, {"from", mission::to_string(tr.from)}, {"to", mission::to_string(tr.to)}});
  j["transitions"] = transitions;
  return j.dump(2);
}

}  // namespace lastmile::cli
