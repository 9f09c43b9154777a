#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "lastmile/sensors.hpp"
#include "lastmile/types.hpp"
#include "lastmile/world.hpp"

namespace lastmile::mapping {

enum class Occupancy : std::uint8_t { kUnknown = 0, kFree = 1, kOccupied = 2 };

/// Drone-centered occupancy grid stored in an n^3 circular buffer. The volume
/// covers global cells [offset, offset + n) per axis; global cell g lives at
/// storage slot (g mod n), so moving the volume never copies retained cells.
class OccupancyRingBuffer {
 public:
  explicit OccupancyRingBuffer(int n = 64, double resolution = 0.2,
                               const Vec3& center = Vec3::Zero());

  int size() const { return n_; }
  double resolution() const { return resolution_; }
  const Vec3i& offset() const { return offset_; }

  Vec3i cell_of(const Vec3& p) const;
  Vec3 cell_center(const Vec3i& g) const;
  bool in_volume(const Vec3i& g) const;
  std::size_t storage_index(const Vec3i& g) const;

  Occupancy at(const Vec3i& g) const;
  /// UNKNOWN outside the volume.
  Occupancy occupancy_at(const Vec3& p) const { return at(cell_of(p)); }
  /// Writes outside the volume are dropped.
  void set(const Vec3i& g, Occupancy state);

  /// Recenters the volume on new_center (cell granularity). Cells leaving the
  /// volume are reset to UNKNOWN so they read UNKNOWN when re-entered.
  void move_volume(const Vec3& new_center);

  std::size_t count(Occupancy state) const;
  const std::vector<Occupancy>& storage() const { return cells_; }

 private:
  void clear_slice(int axis, int global_index);

  int n_;
  int mask_;
  double resolution_;
  Vec3i offset_;
  std::vector<Occupancy> cells_;
};

/// Ray-casts every depth pixel into the buffer: endpoints become OCCUPIED,
/// traversed cells FREE (never overriding a cell marked OCCUPIED by this
/// frame). No-return pixels, and returns beyond max_insert_range, carve FREE
/// up to max_insert_range.
void insert_depth(OccupancyRingBuffer& buf, const Pose& camera_pose,
                  const sensors::DepthImage& depth, double max_insert_range);

/// Fills the whole volume from ground truth: cells whose center lies in a box
/// become OCCUPIED, all others FREE. Used for tests and offline checks.
void rasterize_world(OccupancyRingBuffer& buf, const world::VoxelWorld& world);

/// Visits the cells crossed by the segment a->b (3D DDA), stopping early
/// when the visitor returns false. The cell containing b is not visited.
template <typename Visitor>
void traverse_cells(const OccupancyRingBuffer& buf, const Vec3& a, const Vec3& b, Visitor&& visit);

/// Euclidean distance to the nearest OCCUPIED cell center, clamped to d_max.
/// Also holds the depth of each OCCUPIED cell (distance to the nearest
/// non-occupied cell) so the planner can push points out of obstacles.
class DistanceField {
 public:
  DistanceField() = default;

  double d_max() const { return d_max_; }
  double resolution() const { return resolution_; }
  int size() const { return n_; }
  const Vec3i& offset() const { return offset_; }

  /// d_max outside the volume.
  double at(const Vec3i& g) const;
  double interior_at(const Vec3i& g) const;
  /// Trilinear interpolation between cell centers.
  double distance_at(const Vec3& p) const;
  /// Trilinear interpolation of (distance - interior depth); negative inside obstacles.
  double signed_distance_at(const Vec3& p) const;

  const std::vector<double>& distances() const { return distances_; }

 private:
  friend DistanceField compute_distance_field(const OccupancyRingBuffer& buf, double d_max);
  bool in_volume(const Vec3i& g) const;
  std::size_t storage_index(const Vec3i& g) const;
  template <typename F>
  double trilinear(const Vec3& p, F&& value) const;

  int n_ = 0;
  int mask_ = 0;
  double resolution_ = 0.2;
  double d_max_ = 2.0;
  Vec3i offset_ = Vec3i::Zero();
  std::vector<double> distances_;
  std::vector<double> interior_;
};

DistanceField compute_distance_field(const OccupancyRingBuffer& buf, double d_max);

/// One "x,y,z" line per OCCUPIED cell center, in storage order.
void write_occupied_csv(const std::filesystem::path& path, const OccupancyRingBuffer& buf);

// ---------------------------------------------------------------------------

template <typename Visitor>
void traverse_cells(const OccupancyRingBuffer& buf, const Vec3& a, const Vec3& b, Visitor&& visit) {
  const double res = buf.resolution();
  Vec3i cell = buf.cell_of(a);
  const Vec3i end = buf.cell_of(b);
  const Vec3 d = b - a;
  Vec3i step;
  Vec3 t_max, t_delta;
  for (int i = 0; i < 3; ++i) {
    if (d[i] > 0.0) {
      step[i] = 1;
      t_delta[i] = res / d[i];
      t_max[i] = ((cell[i] + 1) * res - a[i]) / d[i];
    } else if (d[i] < 0.0) {
      step[i] = -1;
      t_delta[i] = -res / d[i];
      t_max[i] = (cell[i] * res - a[i]) / d[i];
    } else {
      step[i] = 0;
      t_delta[i] = std::numeric_limits<double>::infinity();
      t_max[i] = std::numeric_limits<double>::infinity();
    }
  }
  // The manhattan cell distance bounds the walk even with rounding at the end.
  const int max_steps = (end - cell).cwiseAbs().sum();
  for (int k = 0; k <= max_steps && cell != end; ++k) {
    if (!visit(cell)) return;
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (t_max[axis] > 1.0) return;
    cell[axis] += step[axis];
    t_max[axis] += t_delta[axis];
  }
}

}  // namespace lastmile::mapping
