#include "lastmile/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace lastmile::world {
namespace {

using json = nlohmann::json;

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw ScenarioError(ScenarioError::Kind::kParse, "field '" + field + "': " + msg);
}

[[noreturn]] void invariant_error(const std::string& msg) {
  throw ScenarioError(ScenarioError::Kind::kInvariant, "invariant violated: " + msg);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) field_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) field_error(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

double number(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) field_error(join(path, key), "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, path);
}

Vec3 vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) field_error(path, "expected [x, y, z]");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) field_error(path, "expected numeric components");
    out[i] = v[i].get<double>();
  }
  return out;
}

Box box(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) field_error(path, "expected [[minx,miny,minz],[maxx,maxy,maxz]]");
  return Box{vec3(v[0], path + "[0]"), vec3(v[1], path + "[1]")};
}

CameraIntrinsics camera(const json& v, const std::string& path) {
  CameraIntrinsics c;
  const json& w = require(v, "width", path);
  const json& h = require(v, "height", path);
  if (!w.is_number_integer() || !h.is_number_integer())
    field_error(path, "width and height must be integers");
  c.width = w.get<int>();
  c.height = h.get<int>();
  c.fx = number(v, "fx", path);
  c.fy = number(v, "fy", path);
  c.cx = number(v, "cx", path);
  c.cy = number(v, "cy", path);
  return c;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace

void validate(const MarkerSpec& m) {
  if (!all_finite(m.center) || !std::isfinite(m.normal_yaw)) invariant_error("marker: non-finite values");
  if (!(m.inner_diameter > 0.0 && m.inner_diameter < m.outer_diameter))
    invariant_error("marker: requires 0 < inner_diameter < outer_diameter");
  if (m.outer_diameter > kMaxOuterDiameter)
    invariant_error("marker: outer_diameter must be <= 0.19 m to fit an A4/letter sheet");
}

double channel_clearance(const Scenario& s) {
  const double z_lo = s.channel_bottom_altitude;
  const double z_hi = s.channel_top.z();
  double best = std::numeric_limits<double>::infinity();
  for (const Box& b : s.world.boxes()) {
    const double dx = std::max({b.min.x() - s.channel_top.x(), 0.0, s.channel_top.x() - b.max.x()});
    const double dy = std::max({b.min.y() - s.channel_top.y(), 0.0, s.channel_top.y() - b.max.y()});
    const double dz = std::max({b.min.z() - z_hi, 0.0, z_lo - b.max.z()});
    best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
  }
  return best;
}

void validate(const Scenario& s) {
  if (s.marker) validate(*s.marker);
  try {
    validate(s.cameras.front);
    validate(s.cameras.front_depth);
  } catch (const std::invalid_argument& e) {
    invariant_error(e.what());
  }
  if (!all_finite(s.home) || !all_finite(s.channel_top)) invariant_error("non-finite position");
  if (!(s.channel_top.z() > s.rooftop_height))
    invariant_error("channel_top altitude must exceed rooftop_height");
  if (!(s.channel_bottom_altitude >= 0.0)) invariant_error("channel_bottom_altitude must be >= 0");
  if (!(s.channel_bottom_altitude < s.channel_top.z()))
    invariant_error("channel_bottom_altitude must be below channel_top");
  if (!(s.cruise_altitude > s.rooftop_height))
    invariant_error("cruise_altitude must exceed rooftop_height");
  if (!(s.drone_radius > 0.0)) invariant_error("drone_radius must be > 0");
  if (!(s.drop_offset > 0.0)) invariant_error("drop_offset must be > 0");
  const auto& n = s.noise;
  if (!(n.gps_sigma_open >= 0.0 && n.gps_bias_urban_max >= 1.0 && n.vo_drift_per_meter >= 0.0 &&
        n.depth_noise_sigma >= 0.0))
    invariant_error("noise parameters must be >= 0 (gps_bias_urban_max >= 1)");
  if (channel_clearance(s) <= s.drone_radius)
    invariant_error("descent channel is obstructed by a world box");
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream msg;
    msg << "parse error at line " << line_of(text, e.byte) << ": " << e.what();
    throw ScenarioError(ScenarioError::Kind::kParse, msg.str());
  }

  Scenario s;
  {
    const json& w = require(doc, "world", "");
    const double res = number(w, "resolution", "world");
    const Box bounds = box(require(w, "bounds", "world"), "world.bounds");
    const json& boxes = require(w, "boxes", "world");
    if (!boxes.is_array()) field_error("world.boxes", "expected an array");
    std::vector<Box> parsed;
    for (std::size_t i = 0; i < boxes.size(); ++i)
      parsed.push_back(box(boxes[i], "world.boxes[" + std::to_string(i) + "]"));
    try {
      s.world = VoxelWorld(std::move(parsed), res, bounds);
    } catch (const std::invalid_argument& e) {
      invariant_error(e.what());
    }
  }
  if (doc.contains("marker") && !doc["marker"].is_null()) {
    const json& m = doc["marker"];
    MarkerSpec spec;
    spec.center = vec3(require(m, "center", "marker"), "marker.center");
    spec.normal_yaw = number(m, "normal_yaw", "marker");
    spec.outer_diameter = number(m, "outer_diameter", "marker");
    spec.inner_diameter = number(m, "inner_diameter", "marker");
    s.marker = spec;
  }
  s.home = vec3(require(doc, "home", ""), "home");
  s.cruise_altitude = number(doc, "cruise_altitude", "");
  s.rooftop_height = number(doc, "rooftop_height", "");
  s.channel_top = vec3(require(doc, "channel_top", ""), "channel_top");
  s.channel_bottom_altitude = number(doc, "channel_bottom_altitude", "");
  s.drop_offset = number(doc, "drop_offset", "");
  s.drone_radius = number_or(doc, "drone_radius", 0.4, "");
  {
    const json& n = require(doc, "noise", "");
    s.noise.gps_sigma_open = number(n, "gps_sigma_open", "noise");
    s.noise.gps_bias_urban_max = number(n, "gps_bias_urban_max", "noise");
    s.noise.vo_drift_per_meter = number(n, "vo_drift_per_meter", "noise");
    s.noise.depth_noise_sigma = number(n, "depth_noise_sigma", "noise");
  }
  {
    const json& c = require(doc, "cameras", "");
    s.cameras.front = camera(require(c, "front", "cameras"), "cameras.front");
    s.cameras.front_depth = camera(require(c, "front_depth", "cameras"), "cameras.front_depth");
  }
  {
    const json& seed = require(doc, "seed", "");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
      field_error("seed", "expected an unsigned integer");
    s.seed = seed.get<std::uint64_t>();
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(ScenarioError::Kind::kIo, "cannot open scenario file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace lastmile::world
