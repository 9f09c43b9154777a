#include "lastmile/marker_tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

namespace lastmile::marker {
namespace {

// Covariance about the mean, accumulated in a second pass for accuracy.
EllipseFit fit_points(const std::vector<int>& us, const std::vector<int>& vs) {
  const std::size_t n = us.size();
  if (n < 3) throw DegenerateRegion("region too small for an ellipse fit");
  double mu = 0, mv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mu += us[i];
    mv += vs[i];
  }
  mu /= n;
  mv /= n;
  double cuu = 0, cvv = 0, cuv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = us[i] - mu, dv = vs[i] - mv;
    cuu += du * du;
    cvv += dv * dv;
    cuv += du * dv;
  }
  cuu /= n;
  cvv /= n;
  cuv /= n;

  const double tr = cuu + cvv;
  const double det = cuu * cvv - cuv * cuv;
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  const double l1 = 0.5 * tr + disc;
  const double l2 = 0.5 * tr - disc;
  if (!(l2 > 1e-9 * std::max(1.0, l1))) throw DegenerateRegion("rank-deficient pixel covariance");

  EllipseFit fit;
  fit.center_u = mu;
  fit.center_v = mv;
  fit.semi_major_px = 2.0 * std::sqrt(l1);
  fit.semi_minor_px = 2.0 * std::sqrt(l2);
  double theta = 0.5 * std::atan2(2.0 * cuv, cuu - cvv);
  if (theta <= -std::numbers::pi / 2) theta += std::numbers::pi;
  fit.orientation = theta;
  return fit;
}

}  // namespace

double PixelRegion::centroid_u() const {
  double s = 0;
  for (int u : us) s += u;
  return us.empty() ? 0.0 : s / us.size();
}

double PixelRegion::centroid_v() const {
  double s = 0;
  for (int v : vs) s += v;
  return vs.empty() ? 0.0 : s / vs.size();
}

void PixelRegion::add(int u, int v) {
  if (us.empty()) {
    min_u = max_u = u;
    min_v = max_v = v;
  } else {
    min_u = std::min(min_u, u);
    max_u = std::max(max_u, u);
    min_v = std::min(min_v, v);
    max_v = std::max(max_v, v);
  }
  us.push_back(u);
  vs.push_back(v);
}

std::vector<PixelRegion> segment(const sensors::GrayImage& image, int threshold) {
  const int w = image.width, h = image.height;
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(w) * h, 0);
  std::vector<int> stack;
  std::vector<PixelRegion> regions;

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t idx = static_cast<std::size_t>(v) * w + u;
      if (visited[idx] || image.pixels[idx] >= threshold) continue;
      PixelRegion region;
      visited[idx] = 1;
      stack.push_back(static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cu = cur % w, cv = cur / w;
        region.add(cu, cv);
        const int nbrs[4][2] = {{cu - 1, cv}, {cu + 1, cv}, {cu, cv - 1}, {cu, cv + 1}};
        for (const auto& nb : nbrs) {
          if (nb[0] < 0 || nb[0] >= w || nb[1] < 0 || nb[1] >= h) continue;
          const std::size_t n = static_cast<std::size_t>(nb[1]) * w + nb[0];
          if (visited[n] || image.pixels[n] >= threshold) continue;
          visited[n] = 1;
          stack.push_back(static_cast<int>(n));
        }
      }
      if (region.area() >= static_cast<std::size_t>(kMinRegionArea)) regions.push_back(std::move(region));
    }
  }
  // Scan order already sorts by first pixel; re-sort by bounding-box corner.
  std::stable_sort(regions.begin(), regions.end(), [](const PixelRegion& a, const PixelRegion& b) {
    return a.min_v != b.min_v ? a.min_v < b.min_v : a.min_u < b.min_u;
  });
  return regions;
}

PixelRegion enclosed_hole(const PixelRegion& region) {
  PixelRegion hole;
  if (region.us.empty()) return hole;
  // Local mask with a one-pixel frame so the outside is connected.
  const int ou = region.min_u - 1, ov = region.min_v - 1;
  const int w = region.max_u - region.min_u + 3;
  const int h = region.max_v - region.min_v + 3;
  enum : std::uint8_t { kFree = 0, kRegion = 1, kOutside = 2 };
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, kFree);
  for (std::size_t i = 0; i < region.us.size(); ++i)
    mask[static_cast<std::size_t>(region.vs[i] - ov) * w + (region.us[i] - ou)] = kRegion;

  std::vector<int> stack{0};
  mask[0] = kOutside;
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    const int cu = cur % w, cv = cur / w;
    const int nbrs[4][2] = {{cu - 1, cv}, {cu + 1, cv}, {cu, cv - 1}, {cu, cv + 1}};
    for (const auto& nb : nbrs) {
      if (nb[0] < 0 || nb[0] >= w || nb[1] < 0 || nb[1] >= h) continue;
      const std::size_t n = static_cast<std::size_t>(nb[1]) * w + nb[0];
      if (mask[n] != kFree) continue;
      mask[n] = kOutside;
      stack.push_back(static_cast<int>(n));
    }
  }
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (mask[static_cast<std::size_t>(v) * w + u] == kFree) hole.add(u + ou, v + ov);
  return hole;
}

EllipseFit fit_ellipse(const PixelRegion& region, bool fill_holes) {
  if (!fill_holes) return fit_points(region.us, region.vs);
  const PixelRegion hole = enclosed_hole(region);
  std::vector<int> us = region.us, vs = region.vs;
  us.insert(us.end(), hole.us.begin(), hole.us.end());
  vs.insert(vs.end(), hole.vs.begin(), hole.vs.end());
  return fit_points(us, vs);
}

AnnulusCheck validate_annulus(const EllipseFit& outer_fit, double hole_area, double disc_area,
                              double hole_center_u, double hole_center_v,
                              const world::MarkerSpec& spec, double tol) {
  AnnulusCheck check;
  if (!(disc_area > 0.0)) return check;
  check.area_ratio = hole_area / disc_area;
  const double expected = std::pow(spec.inner_diameter / spec.outer_diameter, 2);
  const bool ratio_ok = std::abs(check.area_ratio - expected) <= tol;
  const bool concentric = std::hypot(hole_center_u - outer_fit.center_u,
                                     hole_center_v - outer_fit.center_v) <=
                          0.25 * outer_fit.semi_minor_px;
  check.accepted = hole_area > 0.0 && ratio_ok && concentric;
  return check;
}

PositionEstimate estimate_position(const EllipseFit& fit, const CameraIntrinsics& intr,
                                   const world::MarkerSpec& spec) {
  const double z = intr.fx * (0.5 * spec.outer_diameter) / fit.semi_major_px;
  const Vec3 bearing((fit.center_u - intr.cx) / intr.fx, (fit.center_v - intr.cy) / intr.fy, 1.0);
  const double ratio = std::clamp(fit.semi_minor_px / fit.semi_major_px, 0.0, 1.0);
  double tilt = std::acos(ratio);
  tilt = std::min(tilt, std::nextafter(std::numbers::pi / 2, 0.0));
  return {bearing * z, tilt};
}

std::optional<MarkerDetection> detect(const sensors::GrayImage& image, const CameraIntrinsics& intr,
                                      const world::MarkerSpec& spec, const DetectorParams& params) {
  std::optional<MarkerDetection> best;
  double best_area = 0.0;
  for (const PixelRegion& region : segment(image, params.threshold)) {
    // A marker touching the image border cannot be measured reliably.
    if (region.min_u == 0 || region.min_v == 0 || region.max_u == image.width - 1 ||
        region.max_v == image.height - 1)
      continue;
    const PixelRegion hole = enclosed_hole(region);
    if (hole.area() == 0) continue;
    const double disc_area = static_cast<double>(region.area() + hole.area());
    EllipseFit fit;
    try {
      fit = fit_ellipse(region, true);
    } catch (const DegenerateRegion&) {
      continue;
    }
    if (fit.semi_major_px < params.min_semi_major_px) continue;
    const AnnulusCheck check =
        validate_annulus(fit, static_cast<double>(hole.area()), disc_area, hole.centroid_u(),
                         hole.centroid_v(), spec, params.area_ratio_tol);
    if (!check.accepted || disc_area <= best_area) continue;
    const PositionEstimate pos = estimate_position(fit, intr, spec);
    best_area = disc_area;
    best = MarkerDetection{fit, pos.position_cam, pos.tilt, check.area_ratio};
  }
  return best;
}

TimedDetection detect_timed(const sensors::GrayImage& image, const CameraIntrinsics& intr,
                            const world::MarkerSpec& spec, const DetectorParams& params) {
  const auto start = std::chrono::steady_clock::now();
  TimedDetection out;
  out.detection = detect(image, intr, spec, params);
  const auto stop = std::chrono::steady_clock::now();
  out.elapsed_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return out;
}

}  // namespace lastmile::marker
