#include "lastmile/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace lastmile::mapping {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int floor_div(double x, double res) { return static_cast<int>(std::floor(x / res)); }

// Exact 1D squared distance transform (lower envelope of parabolas) over
// `n` samples spaced `stride` apart in `data`. Entries equal to kInf are
// treated as having no source.
void edt_1d(double* data, int n, int stride, std::vector<double>& f, std::vector<int>& v,
            std::vector<double>& z) {
  f.resize(n);
  for (int i = 0; i < n; ++i) f[i] = data[static_cast<std::size_t>(i) * stride];
  v.resize(n);
  z.resize(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s > z[k]) break;
      --k;  // z[0] is -inf so k stays >= 0
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) return;  // row has no sources; leave kInf
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    data[static_cast<std::size_t>(q) * stride] = dq * dq + f[v[j]];
  }
}

// In-place 3D squared EDT over an n^3 array in logical (x fastest) order.
void edt_3d(std::vector<double>& grid, int n) {
  std::vector<double> f;
  std::vector<int> v;
  std::vector<double> z;
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  for (int c = 0; c < n; ++c)
    for (int b = 0; b < n; ++b) edt_1d(&grid[c * nn + static_cast<std::size_t>(b) * n], n, 1, f, v, z);
  for (int c = 0; c < n; ++c)
    for (int a = 0; a < n; ++a) edt_1d(&grid[c * nn + a], n, n, f, v, z);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a)
      edt_1d(&grid[static_cast<std::size_t>(b) * n + a], n, static_cast<int>(nn), f, v, z);
}

}  // namespace

OccupancyRingBuffer::OccupancyRingBuffer(int n, double resolution, const Vec3& center)
    : n_(n), mask_(n - 1), resolution_(resolution) {
  if (n <= 0 || (n & (n - 1)) != 0) throw std::invalid_argument("ring buffer size must be a power of two");
  if (!(resolution > 0.0)) throw std::invalid_argument("ring buffer resolution must be > 0");
  cells_.assign(static_cast<std::size_t>(n) * n * n, Occupancy::kUnknown);
  offset_ = cell_of(center) - Vec3i::Constant(n_ / 2);
}

Vec3i OccupancyRingBuffer::cell_of(const Vec3& p) const {
  return Vec3i(floor_div(p.x(), resolution_), floor_div(p.y(), resolution_),
               floor_div(p.z(), resolution_));
}

Vec3 OccupancyRingBuffer::cell_center(const Vec3i& g) const {
  return (g.cast<double>() + Vec3::Constant(0.5)) * resolution_;
}

bool OccupancyRingBuffer::in_volume(const Vec3i& g) const {
  const Vec3i rel = g - offset_;
  return (rel.array() >= 0).all() && (rel.array() < n_).all();
}

std::size_t OccupancyRingBuffer::storage_index(const Vec3i& g) const {
  const std::size_t x = static_cast<std::size_t>(g.x() & mask_);
  const std::size_t y = static_cast<std::size_t>(g.y() & mask_);
  const std::size_t z = static_cast<std::size_t>(g.z() & mask_);
  return (z * n_ + y) * n_ + x;
}

Occupancy OccupancyRingBuffer::at(const Vec3i& g) const {
  return in_volume(g) ? cells_[storage_index(g)] : Occupancy::kUnknown;
}

void OccupancyRingBuffer::set(const Vec3i& g, Occupancy state) {
  if (in_volume(g)) cells_[storage_index(g)] = state;
}

void OccupancyRingBuffer::clear_slice(int axis, int global_index) {
  const int s = global_index & mask_;
  for (int a = 0; a < n_; ++a) {
    for (int b = 0; b < n_; ++b) {
      std::size_t idx;
      if (axis == 0) idx = (static_cast<std::size_t>(b) * n_ + a) * n_ + s;
      else if (axis == 1) idx = (static_cast<std::size_t>(b) * n_ + s) * n_ + a;
      else idx = (static_cast<std::size_t>(s) * n_ + b) * n_ + a;
      cells_[idx] = Occupancy::kUnknown;
    }
  }
}

void OccupancyRingBuffer::move_volume(const Vec3& new_center) {
  const Vec3i new_offset = cell_of(new_center) - Vec3i::Constant(n_ / 2);
  const Vec3i shift = new_offset - offset_;
  if (shift.isZero()) return;
  if ((shift.cwiseAbs().array() >= n_).any()) {
    std::fill(cells_.begin(), cells_.end(), Occupancy::kUnknown);
    offset_ = new_offset;
    return;
  }
  for (int axis = 0; axis < 3; ++axis) {
    const int d = shift[axis];
    // Global indices entering the window along this axis.
    const int lo = d > 0 ? offset_[axis] + n_ : new_offset[axis];
    const int hi = d > 0 ? new_offset[axis] + n_ : offset_[axis];
    for (int g = lo; g < hi; ++g) clear_slice(axis, g);
  }
  offset_ = new_offset;
}

std::size_t OccupancyRingBuffer::count(Occupancy state) const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), state));
}

void insert_depth(OccupancyRingBuffer& buf, const Pose& camera_pose,
                  const sensors::DepthImage& depth, double max_insert_range) {
  const CameraIntrinsics& intr = depth.intrinsics;
  const double cy = std::cos(camera_pose.yaw), sy = std::sin(camera_pose.yaw);
  const Vec3& origin = camera_pose.position;

  struct Ray {
    Vec3 end;
    bool hit;
  };
  std::vector<Ray> rays;
  rays.reserve(depth.depths.size());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const Vec3 d_cam = sensors::pixel_ray_camera(intr, u, v);
      const double z = depth.at(u, v);
      const bool hit = std::isfinite(z) && z <= max_insert_range;
      const double zz = hit ? z : max_insert_range;
      rays.push_back({origin + camera_to_world_dir(cy, sy, d_cam * zz), hit});
    }
  }

  // Endpoints first so free-space carving never erases this frame's hits.
  std::vector<std::size_t> hits;
  std::vector<std::uint8_t> hit_mark(buf.storage().size(), 0);
  for (const Ray& r : rays) {
    if (!r.hit) continue;
    const Vec3i g = buf.cell_of(r.end);
    if (!buf.in_volume(g)) continue;
    const std::size_t idx = buf.storage_index(g);
    if (!hit_mark[idx]) hits.push_back(idx);
    hit_mark[idx] = 1;
  }
  for (const Ray& r : rays) {
    traverse_cells(buf, origin, r.end, [&](const Vec3i& g) {
      if (!buf.in_volume(g)) return false;
      if (!hit_mark[buf.storage_index(g)]) buf.set(g, Occupancy::kFree);
      return true;
    });
  }
  for (const Ray& r : rays) {
    if (!r.hit) continue;
    buf.set(buf.cell_of(r.end), Occupancy::kOccupied);
  }
}

void rasterize_world(OccupancyRingBuffer& buf, const world::VoxelWorld& world) {
  const int n = buf.size();
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3i g = buf.offset() + Vec3i(i, j, k);
        buf.set(g, world::is_occupied(world, buf.cell_center(g)) ? Occupancy::kOccupied : Occupancy::kFree);
      }
}

// --- DistanceField ---------------------------------------------------------

bool DistanceField::in_volume(const Vec3i& g) const {
  const Vec3i rel = g - offset_;
  return (rel.array() >= 0).all() && (rel.array() < n_).all();
}

std::size_t DistanceField::storage_index(const Vec3i& g) const {
  return (static_cast<std::size_t>(g.z() & mask_) * n_ + static_cast<std::size_t>(g.y() & mask_)) * n_ +
         static_cast<std::size_t>(g.x() & mask_);
}

double DistanceField::at(const Vec3i& g) const {
  return in_volume(g) ? distances_[storage_index(g)] : d_max_;
}

double DistanceField::interior_at(const Vec3i& g) const {
  return in_volume(g) ? interior_[storage_index(g)] : 0.0;
}

template <typename F>
double DistanceField::trilinear(const Vec3& p, F&& value) const {
  const Vec3 q = p / resolution_ - Vec3::Constant(0.5);
  const Vec3 base = q.array().floor();
  const Vec3 w = q - base;
  const Vec3i g0 = base.cast<int>();
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const Vec3i off((c & 1), (c >> 1) & 1, (c >> 2) & 1);
    const double wx = off.x() ? w.x() : 1.0 - w.x();
    const double wy = off.y() ? w.y() : 1.0 - w.y();
    const double wz = off.z() ? w.z() : 1.0 - w.z();
    const double weight = wx * wy * wz;
    if (weight != 0.0) acc += weight * value(g0 + off);
  }
  return acc;
}

double DistanceField::distance_at(const Vec3& p) const {
  return trilinear(p, [this](const Vec3i& g) { return at(g); });
}

double DistanceField::signed_distance_at(const Vec3& p) const {
  return trilinear(p, [this](const Vec3i& g) { return at(g) - interior_at(g); });
}

DistanceField compute_distance_field(const OccupancyRingBuffer& buf, double d_max) {
  if (!(d_max > 0.0)) throw std::invalid_argument("d_max must be > 0");
  const int n = buf.size();
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  DistanceField field;
  field.n_ = n;
  field.mask_ = n - 1;
  field.resolution_ = buf.resolution();
  field.d_max_ = d_max;
  field.offset_ = buf.offset();

  std::vector<double> outside(total), inside(total);
  std::vector<std::size_t> slot(total);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t li = (static_cast<std::size_t>(k) * n + j) * n + i;
        const Vec3i g = buf.offset() + Vec3i(i, j, k);
        slot[li] = buf.storage_index(g);
        const bool occ = buf.storage()[slot[li]] == Occupancy::kOccupied;
        outside[li] = occ ? 0.0 : kInf;
        inside[li] = occ ? kInf : 0.0;
      }
  edt_3d(outside, n);
  edt_3d(inside, n);

  field.distances_.assign(total, d_max);
  field.interior_.assign(total, 0.0);
  const double res = buf.resolution();
  for (std::size_t li = 0; li < total; ++li) {
    if (outside[li] != kInf) field.distances_[slot[li]] = std::min(std::sqrt(outside[li]) * res, d_max);
    // Occupied cells with no free cell anywhere in the volume get the deepest value.
    if (inside[li] != 0.0)
      field.interior_[slot[li]] = inside[li] == kInf ? d_max : std::min(std::sqrt(inside[li]) * res, d_max);
  }
  return field;
}

void write_occupied_csv(const std::filesystem::path& path, const OccupancyRingBuffer& buf) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "x,y,z\n";
  const int n = buf.size();
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3i g = buf.offset() + Vec3i(i, j, k);
        if (buf.at(g) != Occupancy::kOccupied) continue;
        const Vec3 c = buf.cell_center(g);
        out << c.x() << ',' << c.y() << ',' << c.z() << '\n';
      }
}

}  // namespace lastmile::mapping
