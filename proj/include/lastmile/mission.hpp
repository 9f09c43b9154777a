#pragma once

#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lastmile/mapping.hpp"
#include "lastmile/marker_tracker.hpp"
#include "lastmile/planner.hpp"
#include "lastmile/scenario.hpp"
#include "lastmile/sensors.hpp"
#include "lastmile/types.hpp"

namespace lastmile::mission {

enum class MissionState {
  kIdle,
  kTakeoff,
  kGpsTransit,
  kDescentScan,
  kMarkerApproach,
  kDropOff,
  kReturn,
  kAscendAbort,
  kLand,
  kFailed,
  kDone,
};

std::string_view to_string(MissionState s);
bool is_terminal(MissionState s);
/// True iff from -> to is an edge of the documented transition graph.
bool allowed_transition(MissionState from, MissionState to);

/// Componentwise median of the last k WORLD-frame detections.
class MarkerFilter {
 public:
  explicit MarkerFilter(int k = 5, int k_min = 5) : k_(k), k_min_(k_min) {}

  void add(const Vec3& world_position);
  /// A processed frame without a valid detection breaks the consecutive run.
  void miss() { consecutive_ = 0; }

  int count() const { return count_; }
  int consecutive() const { return consecutive_; }
  bool ready() const { return count_ >= k_min_; }
  /// Defined only when ready().
  std::optional<Vec3> filtered_position() const;

 private:
  int k_;
  int k_min_;
  int count_ = 0;
  int consecutive_ = 0;
  std::deque<Vec3> window_;
};

/// ODOM -> WORLD translation anchoring.
struct FusionMemory {
  std::optional<Vec3> offset;  // world = odom + offset
  double alpha = 0.1;
};

/// With a fresh undegraded fix the estimate is the GPS position and the offset
/// is low-passed toward (gps - odom). Otherwise odom + offset; degraded fixes
/// are ignored. Before any anchoring the offset is zero.
Pose fuse_state(const std::optional<sensors::GpsFix>& gps, const sensors::OdomEstimate& odom, double rooftop_height,
                FusionMemory& memory);

class EmptyPath : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Waypoints of the inbound path, one per `spacing` meters of travel.
class PathRecorder {
 public:
  explicit PathRecorder(double spacing = 0.5) : spacing_(spacing) {}
  void record(const Vec3& p);
  void clear() { points_.clear(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  double spacing_;
  std::vector<Vec3> points_;
};

/// Throws EmptyPath when nothing was recorded.
std::vector<Vec3> record_and_reverse_path(const PathRecorder& recorder);

struct MissionConfig {
  planner::PlannerConfig transit;   // open air above the rooftops
  planner::PlannerConfig scan;      // descent in the channel
  planner::PlannerConfig approach;  // marker approach and same-path return
  int filter_k = 5;
  int filter_k_min = 5;
  double channel_capture_radius = 1.0;  // horizontal, GPS_TRANSIT -> DESCENT_SCAN
  double arrival_tolerance = 0.3;
  double replan_goal_shift = 0.15;
  double detection_timeout = 5.0;
  double hold_duration = 3.0;
  double dropoff_duration = 3.0;
  double altitude_tolerance = 0.3;
  double waypoint_spacing = 0.5;
  // Farther detections are treated as misses; keeps the filtered estimate
  // away from the ragged edge of the detection range.
  double max_detection_range = 8.0;

  static MissionConfig defaults();
};

/// One marker frame processed between two ticks.
struct Observation {
  double stamp = 0.0;
  std::optional<marker::MarkerDetection> detection;
  Pose camera_pose;  // fused estimate at capture time
};

struct MissionInputs {
  double clock = 0.0;
  Pose state_estimate;
  Vec3 velocity_estimate = Vec3::Zero();
  std::vector<Observation> observations;
  bool landed = false;
  const mapping::DistanceField* field = nullptr;
  const mapping::OccupancyRingBuffer* buffer = nullptr;
};

struct Transition {
  double stamp = 0.0;
  MissionState from = MissionState::kIdle;
  MissionState to = MissionState::kIdle;
  std::string reason;
};

struct ReoptRecord {
  double stamp = 0.0;
  double cost_before = 0.0;
  double cost_after = 0.0;
  int iterations = 0;
  int restarts = 0;
  double min_clearance = 0.0;
  bool feasible = true;
};

struct TickOutput {
  std::optional<planner::Setpoint> setpoint;
  // Autopilot mode: vertical-only tracking during TAKEOFF and LAND.
  bool vertical_only = false;
  std::vector<Transition> transitions;
  std::optional<ReoptRecord> reopt;
  std::vector<std::string> events;
};

class Mission {
 public:
  Mission(const world::Scenario& scenario, MissionConfig cfg = MissionConfig::defaults());

  MissionState state() const { return state_; }
  TickOutput tick(const MissionInputs& in);

  const MarkerFilter& filter() const { return filter_; }
  const PathRecorder& recorder() const { return recorder_; }
  const std::optional<planner::UniformBSpline>& spline() const { return spline_; }
  /// Filtered marker estimate frozen at the MARKER_APPROACH transition.
  const std::optional<Vec3>& marker_at_approach() const { return marker_at_approach_; }
  std::optional<double> approach_time() const { return approach_time_; }
  double scan_yaw() const { return scan_yaw_; }
  const std::optional<Vec3>& goal() const { return goal_; }
  const MissionConfig& config() const { return cfg_; }

 private:
  void transition(MissionState to, const std::string& reason, double now, TickOutput& out);
  void plan(const std::vector<Vec3>& waypoints, const MissionInputs& in, const planner::PlannerConfig& cfg);
  void follow(const MissionInputs& in, const planner::PlannerConfig& cfg, std::optional<double> yaw,
              TickOutput& out, bool escalate);
  void hold_here(const MissionInputs& in, TickOutput& out);
  Vec3 drop_point() const;
  void ingest(const MissionInputs& in);
  bool spline_finished(double now) const;

  world::Scenario scenario_;
  MissionConfig cfg_;
  MissionState state_ = MissionState::kIdle;
  double state_since_ = 0.0;
  bool aborted_ = false;
  bool homebound_ = false;
  MarkerFilter filter_;
  PathRecorder recorder_;
  std::optional<planner::UniformBSpline> spline_;
  std::optional<Vec3> goal_;
  std::optional<double> hold_since_;
  std::optional<Vec3> hold_position_;
  std::optional<double> last_detection_;
  std::optional<Vec3> marker_at_approach_;
  std::optional<double> approach_time_;
  int scan_stage_ = 0;  // 0: reach channel_top, 1: scanning descent
  double scan_yaw_ = 0.0;
  double last_yaw_ = 0.0;
};

/// Heading that faces the building from the descent channel: opposite the
/// marker normal when a marker is given, otherwise toward the nearest box.
double building_facing_yaw(const world::Scenario& scenario);

}  // namespace lastmile::mission
