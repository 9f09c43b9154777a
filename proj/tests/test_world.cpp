#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lastmile/rng.hpp"
#include "lastmile/scenario.hpp"
#include "lastmile/world.hpp"

namespace lastmile::world {
namespace {

const Box kBounds{Vec3(-20, -20, -20), Vec3(20, 20, 20)};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::filesystem::path kDefault = std::filesystem::path(LASTMILE_SOURCE_DIR) / "scenarios/default.json";

TEST(World, IsOccupied) {
  const VoxelWorld empty({}, 0.2, kBounds);
  EXPECT_FALSE(is_occupied(empty, Vec3(0.5, 0.5, 0.5)));
  const VoxelWorld w({Box{Vec3(0, 0, 0), Vec3(1, 1, 1)}}, 0.2, kBounds);
  EXPECT_TRUE(is_occupied(w, Vec3(0.5, 0.5, 0.5)));
  EXPECT_FALSE(is_occupied(w, Vec3(1.5, 0.5, 0.5)));
  EXPECT_TRUE(is_occupied(w, Vec3(1.0, 0.5, 0.0)));  // boundary is inside
}

TEST(World, RejectsBadGeometry) {
  EXPECT_THROW(VoxelWorld({}, 0.0, kBounds), std::invalid_argument);
  EXPECT_THROW(VoxelWorld({Box{Vec3(0, 0, 0), Vec3(0, 1, 1)}}, 0.2, kBounds), std::invalid_argument);
  EXPECT_THROW(VoxelWorld({Box{Vec3(0, 0, 0), Vec3(30, 1, 1)}}, 0.2, kBounds), std::invalid_argument);
}

TEST(World, RayIntersectAxisAligned) {
  const VoxelWorld w({Box{Vec3(2, -1, -1), Vec3(3, 1, 1)}}, 0.2, kBounds);
  const auto t = ray_intersect(w, Vec3::Zero(), Vec3::UnitX(), 10.0);
  ASSERT_TRUE(t);
  EXPECT_DOUBLE_EQ(*t, 2.0);
  EXPECT_FALSE(ray_intersect(w, Vec3::Zero(), Vec3::UnitX(), 1.5));
  EXPECT_FALSE(ray_intersect(w, Vec3::Zero(), -Vec3::UnitX(), 10.0));
}

// Random boxes and rays against a fine-step marcher; also checks the
// occupied-just-after / free-just-before property at every hit.
TEST(World, RayIntersectMatchesMarcher) {
  Rng rng = make_stream(7, "rays");
  std::vector<Box> boxes;
  for (int i = 0; i < 6; ++i) {
    const Vec3 lo(uniform(rng, -4, 3), uniform(rng, -4, 3), uniform(rng, -4, 3));
    const Vec3 size(uniform(rng, 0.3, 2), uniform(rng, 0.3, 2), uniform(rng, 0.3, 2));
    boxes.push_back(Box{lo, lo + size});
  }
  const VoxelWorld w(boxes, 0.2, kBounds);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    Vec3 origin;
    do {
      origin = Vec3(uniform(rng, -6, 6), uniform(rng, -6, 6), uniform(rng, -6, 6));
    } while (is_occupied(w, origin));
    Vec3 dir(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    if (i % 2 == 0) {  // aim at a box interior so hits are well represented
      const Box& b = boxes[static_cast<std::size_t>(i / 2) % boxes.size()];
      dir = Vec3(uniform(rng, b.min.x(), b.max.x()), uniform(rng, b.min.y(), b.max.y()),
                 uniform(rng, b.min.z(), b.max.z())) - origin;
    }
    dir.normalize();
    const double max_range = 10.0;
    std::optional<double> oracle;
    for (int k = 1; k * 1e-3 <= max_range; ++k) {
      if (is_occupied(w, origin + k * 1e-3 * dir)) {
        oracle = k * 1e-3;
        break;
      }
    }
    const auto t = ray_intersect(w, origin, dir, max_range);
    ASSERT_EQ(t.has_value(), oracle.has_value()) << "ray " << i;
    if (!t) continue;
    ++hits;
    EXPECT_LE(std::abs(*t - *oracle), 2e-3);
    EXPECT_TRUE(is_occupied(w, origin + (*t + 1e-6) * dir));
    EXPECT_FALSE(is_occupied(w, origin + (*t - 1e-6) * dir));
  }
  EXPECT_GT(hits, 400);
}

TEST(World, ClearanceIsDistanceToNearestBox) {
  const VoxelWorld w({Box{Vec3(0, 0, 0), Vec3(1, 1, 1)}, Box{Vec3(5, 0, 0), Vec3(6, 1, 1)}}, 0.2, kBounds);
  EXPECT_DOUBLE_EQ(clearance(w, Vec3(2, 0.5, 0.5)), 1.0);
  EXPECT_DOUBLE_EQ(clearance(w, Vec3(0.5, 0.5, 0.5)), 0.0);
  EXPECT_NEAR(clearance(w, Vec3(-1, -1, 0.5)), std::sqrt(2.0), 1e-12);
}

TEST(Scenario, DefaultLoads) {
  const Scenario s = load_scenario(kDefault);
  EXPECT_EQ(s.cruise_altitude, 30.0);
  EXPECT_EQ(s.rooftop_height, 20.0);
  ASSERT_TRUE(s.marker);
  EXPECT_EQ(s.marker->outer_diameter, 0.18);
  EXPECT_EQ(s.seed, 42u);
}

TEST(Scenario, LoadIsIdempotent) {
  const Scenario a = load_scenario(kDefault);
  const Scenario b = load_scenario(kDefault);
  EXPECT_TRUE(a.world == b.world);
  EXPECT_EQ(a.marker->center, b.marker->center);
  EXPECT_EQ(a.home, b.home);
  EXPECT_EQ(a.channel_top, b.channel_top);
  EXPECT_EQ(a.seed, b.seed);
}

TEST(Scenario, InflatedChannelIsFree) {
  const Scenario s = load_scenario(kDefault);
  Rng rng = make_stream(3, "channel");
  for (int i = 0; i < 100; ++i) {
    const double r = s.drone_radius * std::sqrt(uniform(rng, 0, 1));
    const double a = uniform(rng, 0, 2 * std::numbers::pi);
    const Vec3 p(s.channel_top.x() + r * std::cos(a), s.channel_top.y() + r * std::sin(a),
                 uniform(rng, s.channel_bottom_altitude, s.channel_top.z()));
    EXPECT_FALSE(is_occupied(s.world, p));
  }
}

TEST(Scenario, MarkerDiameterInvariant) {
  const std::string text = read_file(kDefault);
  std::string bad = text;
  bad.replace(bad.find("\"inner_diameter\": 0.09"), 22, "\"inner_diameter\": 0.18");
  try {
    parse_scenario(bad);
    FAIL() << "expected an invariant error";
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.kind(), ScenarioError::Kind::kInvariant);
    EXPECT_NE(std::string(e.what()).find("inner_diameter"), std::string::npos);
  }
}

TEST(Scenario, ObstructedChannelIsRejected) {
  std::string text = read_file(kDefault);
  const std::string anchor = "\"boxes\": [";
  text.insert(text.find(anchor) + anchor.size(), "\n      [[-0.5, 6.5, 5], [0.5, 7.5, 6]],");
  try {
    parse_scenario(text);
    FAIL() << "expected an invariant error";
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.kind(), ScenarioError::Kind::kInvariant);
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos);
  }
}

TEST(Scenario, ParseErrorsCarryContext) {
  try {
    parse_scenario("{\n\"world\": \n}");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.kind(), ScenarioError::Kind::kParse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::string text = read_file(kDefault);
  text.replace(text.find("\"cruise_altitude\": 30"), 21, "\"cruise_altitude\": \"high\"");
  try {
    parse_scenario(text);
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.kind(), ScenarioError::Kind::kParse);
    EXPECT_NE(std::string(e.what()).find("cruise_altitude"), std::string::npos);
  }
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ScenarioError);
}

TEST(Scenario, NullMarkerIsAllowed) {
  std::string text = read_file(kDefault);
  const auto b = text.find("\"marker\": {");
  const auto e = text.find('}', b);
  text.replace(b, e - b + 1, "\"marker\": null");
  EXPECT_FALSE(parse_scenario(text).marker);
}

}  // namespace
}  // namespace lastmile::world
