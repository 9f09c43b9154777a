#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "lastmile/scenario.hpp"
#include "lastmile/sensors.hpp"
#include "lastmile/types.hpp"

namespace lastmile::marker {

inline constexpr int kMinRegionArea = 20;
inline constexpr int kDefaultThreshold = 100;

struct PixelRegion {
  std::vector<int> us;
  std::vector<int> vs;
  int min_u = 0, min_v = 0, max_u = 0, max_v = 0;

  std::size_t area() const { return us.size(); }
  double centroid_u() const;
  double centroid_v() const;
  void add(int u, int v);
};

struct EllipseFit {
  double center_u = 0.0;
  double center_v = 0.0;
  double semi_major_px = 0.0;
  double semi_minor_px = 0.0;
  double orientation = 0.0;  // principal axis angle in the image, (-pi/2, pi/2]
};

struct MarkerDetection {
  EllipseFit ellipse;
  Vec3 position_cam = Vec3::Zero();
  double tilt_estimate = 0.0;
  double area_ratio = 0.0;
};

struct AnnulusCheck {
  bool accepted = false;
  double area_ratio = 0.0;
};

class DegenerateRegion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 4-connected dark regions (luminance < threshold) of at least
/// kMinRegionArea pixels, ordered by (min v, min u).
std::vector<PixelRegion> segment(const sensors::GrayImage& image, int threshold = kDefaultThreshold);

/// Pixels enclosed by the region (not 4-reachable from outside its bounding box).
PixelRegion enclosed_hole(const PixelRegion& region);

/// Moment-based fit: semi-axes 2*sqrt(eigenvalue) of the pixel covariance.
/// With fill_holes the region is first united with its enclosed hole.
/// Throws DegenerateRegion for rank-deficient covariance.
EllipseFit fit_ellipse(const PixelRegion& region, bool fill_holes);

AnnulusCheck validate_annulus(const EllipseFit& outer_fit, double hole_area, double disc_area,
                              double hole_center_u, double hole_center_v,
                              const world::MarkerSpec& spec, double tol);

struct PositionEstimate {
  Vec3 position_cam;
  double tilt;
};

PositionEstimate estimate_position(const EllipseFit& fit, const CameraIntrinsics& intr,
                                   const world::MarkerSpec& spec);

struct DetectorParams {
  int threshold = kDefaultThreshold;
  double area_ratio_tol = 0.08;
  // Below this outer semi-axis the pixel lattice makes range errors exceed 5%.
  double min_semi_major_px = 4.3;
};

std::optional<MarkerDetection> detect(const sensors::GrayImage& image, const CameraIntrinsics& intr,
                                      const world::MarkerSpec& spec, const DetectorParams& params = {});

/// detect() plus its wall-clock duration in milliseconds.
struct TimedDetection {
  std::optional<MarkerDetection> detection;
  double elapsed_ms = 0.0;
};
TimedDetection detect_timed(const sensors::GrayImage& image, const CameraIntrinsics& intr,
                            const world::MarkerSpec& spec, const DetectorParams& params = {});

}  // namespace lastmile::marker
