#include "lastmile/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lastmile::world {

double Box::distance(const Vec3& p) const {
  const Vec3 d = (min - p).cwiseMax(p - max).cwiseMax(0.0);
  return d.norm();
}

VoxelWorld::VoxelWorld(std::vector<Box> boxes, double resolution, Box bounds)
    : boxes_(std::move(boxes)), resolution_(resolution), bounds_(bounds) {
  if (!(resolution_ > 0.0)) throw std::invalid_argument("world.resolution must be > 0");
  if (!(bounds_.min.array() < bounds_.max.array()).all())
    throw std::invalid_argument("world.bounds: min must be < max componentwise");
  for (std::size_t i = 0; i < boxes_.size(); ++i) {
    const Box& b = boxes_[i];
    if (!all_finite(b.min) || !all_finite(b.max))
      throw std::invalid_argument("world.boxes[" + std::to_string(i) + "]: non-finite corner");
    if (!(b.min.array() < b.max.array()).all())
      throw std::invalid_argument("world.boxes[" + std::to_string(i) +
                                  "]: min must be < max componentwise");
    if (!bounds_.contains(b.min) || !bounds_.contains(b.max))
      throw std::invalid_argument("world.boxes[" + std::to_string(i) + "]: outside world bounds");
  }
}

bool VoxelWorld::operator==(const VoxelWorld& other) const {
  if (resolution_ != other.resolution_ || bounds_.min != other.bounds_.min ||
      bounds_.max != other.bounds_.max || boxes_.size() != other.boxes_.size())
    return false;
  for (std::size_t i = 0; i < boxes_.size(); ++i)
    if (boxes_[i].min != other.boxes_[i].min || boxes_[i].max != other.boxes_[i].max) return false;
  return true;
}

bool is_occupied(const VoxelWorld& world, const Vec3& p) {
  return std::any_of(world.boxes().begin(), world.boxes().end(),
                     [&](const Box& b) { return b.contains(p); });
}

std::optional<double> ray_box(const Box& box, const Vec3& origin, const Vec3& dir) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.min[a] || origin[a] > box.max[a]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / dir[a];
    double t0 = (box.min[a] - origin[a]) * inv;
    double t1 = (box.max[a] - origin[a]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return std::nullopt;
  }
  if (t_exit < 0.0) return std::nullopt;
  return std::max(t_enter, 0.0);
}

std::optional<double> ray_intersect(const VoxelWorld& world, const Vec3& origin,
                                    const Vec3& dir, double max_range) {
  std::optional<double> best;
  for (const Box& b : world.boxes()) {
    const auto t = ray_box(b, origin, dir);
    if (t && *t <= max_range && (!best || *t < *best)) best = t;
  }
  return best;
}

double clearance(const VoxelWorld& world, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Box& b : world.boxes()) best = std::min(best, b.distance(p));
  return best;
}

}  // namespace lastmile::world
