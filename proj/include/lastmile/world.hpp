#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lastmile/types.hpp"

namespace lastmile::world {

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  /// Euclidean distance from p to the box, 0 inside.
  double distance(const Vec3& p) const;
};

/// Ground-truth static scene. Immutable once built.
class VoxelWorld {
 public:
  VoxelWorld() = default;
  /// Throws std::invalid_argument when an invariant is violated.
  VoxelWorld(std::vector<Box> boxes, double resolution, Box bounds);

  const std::vector<Box>& boxes() const { return boxes_; }
  double resolution() const { return resolution_; }
  const Box& bounds() const { return bounds_; }

  bool operator==(const VoxelWorld& other) const;

 private:
  std::vector<Box> boxes_;
  double resolution_ = 0.2;
  Box bounds_{Vec3::Constant(-1e3), Vec3::Constant(1e3)};
};

/// Boundary counts as inside.
bool is_occupied(const VoxelWorld& world, const Vec3& p);

/// Slab test against a single box. Returns the entry distance along the ray
/// (0 when the origin is inside) or nullopt when the ray misses.
std::optional<double> ray_box(const Box& box, const Vec3& origin, const Vec3& dir);

/// Smallest t in (0, max_range] where origin + t*dir enters a box. An origin
/// already inside a box reports t = 0.
std::optional<double> ray_intersect(const VoxelWorld& world, const Vec3& origin,
                                    const Vec3& dir, double max_range);

/// Distance from p to the nearest box surface (0 when inside any box).
/// Returns +inf for an empty world.
double clearance(const VoxelWorld& world, const Vec3& p);

}  // namespace lastmile::world
