#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lastmile/marker_tracker.hpp"
#include "lastmile/sim.hpp"

namespace lastmile::marker {
namespace {

using sensors::GrayImage;

const CameraIntrinsics kFront{640, 480, 457.0, 457.0, 319.5, 239.5};

// Rasterizes a filled ellipse by pixel-center sampling.
void fill_ellipse(GrayImage& img, double cu, double cv, double a, double b, double theta, std::uint8_t value) {
  const double c = std::cos(theta), s = std::sin(theta);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const double du = u - cu, dv = v - cv;
      const double x = c * du + s * dv, y = -s * du + c * dv;
      if ((x * x) / (a * a) + (y * y) / (b * b) <= 1.0) img.at(u, v) = value;
    }
  }
}

GrayImage ideal_view(double distance, double tilt = 0.0) {
  return cli::render_axis_view(kFront, world::MarkerSpec{}, distance, tilt);
}

TEST(Segment, WhiteImageHasNoRegions) {
  EXPECT_TRUE(segment(GrayImage(64, 48, 255)).empty());
}

TEST(Segment, DiscAreaMatchesRaster) {
  GrayImage img(200, 200, 255);
  fill_ellipse(img, 100, 100, 50, 50, 0, 0);
  const auto regions = segment(img);
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_NEAR(static_cast<double>(regions[0].area()), std::numbers::pi * 2500, 0.01 * std::numbers::pi * 2500);
}

TEST(Segment, OrderedByTopLeftCorner) {
  GrayImage img(200, 120, 255);
  fill_ellipse(img, 150, 30, 10, 10, 0, 0);
  fill_ellipse(img, 40, 80, 10, 10, 0, 0);
  fill_ellipse(img, 2, 2, 1.2, 1.2, 0, 0);  // below the minimum area
  const auto regions = segment(img);
  ASSERT_EQ(regions.size(), 2u);
  EXPECT_LT(regions[0].min_v, regions[1].min_v);
  EXPECT_NEAR(regions[0].centroid_u(), 150, 1e-9);
  EXPECT_NEAR(regions[1].centroid_u(), 40, 1e-9);
}

TEST(FitEllipse, Circle) {
  GrayImage img(200, 200, 255);
  fill_ellipse(img, 100.3, 99.6, 50, 50, 0, 0);
  const EllipseFit f = fit_ellipse(segment(img).at(0), false);
  EXPECT_NEAR(f.semi_major_px, 50, 1);
  EXPECT_NEAR(f.semi_minor_px, 50, 1);
  EXPECT_NEAR(f.center_u, 100.3, 0.05);
  EXPECT_NEAR(f.center_v, 99.6, 0.05);
}

TEST(FitEllipse, AxisAlignedEllipse) {
  GrayImage img(200, 200, 255);
  fill_ellipse(img, 100, 100, 60, 30, 0, 0);
  const EllipseFit f = fit_ellipse(segment(img).at(0), false);
  EXPECT_NEAR(f.semi_major_px, 60, 1);
  EXPECT_NEAR(f.semi_minor_px, 30, 1);
  EXPECT_LE(std::abs(f.orientation), 0.02);
}

TEST(FitEllipse, RotatedEllipse) {
  GrayImage img(200, 200, 255);
  fill_ellipse(img, 100, 100, 60, 30, 0.6, 0);
  const EllipseFit f = fit_ellipse(segment(img).at(0), false);
  EXPECT_NEAR(f.orientation, 0.6, 0.02);
  EXPECT_GE(f.semi_major_px, f.semi_minor_px);
}

TEST(FitEllipse, FillingTheHoleRecoversTheDisc) {
  GrayImage img(200, 200, 255);
  fill_ellipse(img, 100, 100, 40, 40, 0, 0);
  fill_ellipse(img, 100, 100, 20, 20, 0, 255);
  const PixelRegion ring = segment(img).at(0);
  EXPECT_NEAR(fit_ellipse(ring, true).semi_major_px, 40, 1);
  EXPECT_GT(fit_ellipse(ring, false).semi_major_px, 41);  // a ring spreads wider than a disc
  EXPECT_NEAR(static_cast<double>(enclosed_hole(ring).area()), std::numbers::pi * 400, 0.03 * std::numbers::pi * 400);
}

TEST(FitEllipse, SingleRowIsDegenerate) {
  PixelRegion r;
  for (int u = 0; u < 30; ++u) r.add(u, 5);
  EXPECT_THROW(fit_ellipse(r, false), DegenerateRegion);
}

TEST(Annulus, IdealRenderRatio) {
  const auto d = detect(ideal_view(5.0), kFront, world::MarkerSpec{});
  ASSERT_TRUE(d);
  EXPECT_NEAR(d->area_ratio, 0.25, 0.03);
}

TEST(Annulus, SolidDiscAndOffCenterHoleRejected) {
  EllipseFit fit;
  fit.center_u = 100;
  fit.center_v = 100;
  fit.semi_major_px = 40;
  fit.semi_minor_px = 40;
  const world::MarkerSpec spec;
  const double disc = std::numbers::pi * 1600;
  EXPECT_FALSE(validate_annulus(fit, 0.0, disc, 100, 100, spec, 0.08).accepted);
  EXPECT_TRUE(validate_annulus(fit, 0.25 * disc, disc, 100, 100, spec, 0.08).accepted);
  EXPECT_FALSE(validate_annulus(fit, 0.25 * disc, disc, 115, 100, spec, 0.08).accepted);

  GrayImage img(200, 200, 255);
  fill_ellipse(img, 100, 100, 40, 40, 0, 0);
  EXPECT_FALSE(detect(img, kFront, spec));
  fill_ellipse(img, 112, 100, 20, 20, 0, 255);
  EXPECT_FALSE(detect(img, kFront, spec));
}

TEST(EstimatePosition, DeadCenterAtFiveMeters) {
  const auto d = detect(ideal_view(5.0), kFront, world::MarkerSpec{});
  ASSERT_TRUE(d);
  EXPECT_NEAR(d->ellipse.semi_major_px, 457.0 * 0.09 / 5.0, 0.5);
  EXPECT_NEAR(d->position_cam.z(), 5.0, 0.15);
  EXPECT_NEAR(d->position_cam.x(), 0.0, 0.02);
  EXPECT_NEAR(d->position_cam.y(), 0.0, 0.02);
  EXPECT_LE((d->position_cam - Vec3(0, 0, 5)).norm(), 0.15);
}

TEST(EstimatePosition, ExactFitGivesExactRange) {
  EllipseFit fit;
  fit.center_u = kFront.cx + 45.7;
  fit.center_v = kFront.cy;
  fit.semi_major_px = 457.0 * 0.09 / 4.0;
  fit.semi_minor_px = fit.semi_major_px * std::cos(0.5);
  const PositionEstimate p = estimate_position(fit, kFront, world::MarkerSpec{});
  EXPECT_NEAR(p.position_cam.z(), 4.0, 1e-12);
  EXPECT_NEAR(p.position_cam.x(), 0.4, 1e-12);
  EXPECT_NEAR(p.tilt, 0.5, 1e-12);
}

TEST(EstimatePosition, TiltedFortyFive) {
  const auto d = detect(ideal_view(5.0, std::numbers::pi / 4), kFront, world::MarkerSpec{});
  ASSERT_TRUE(d);
  EXPECT_NEAR(d->tilt_estimate, 0.785, 0.06);
  EXPECT_LE(std::abs(d->position_cam.z() - 5.0) / 5.0, 0.03);
  EXPECT_GE(d->tilt_estimate, 0.0);
  EXPECT_LT(d->tilt_estimate, std::numbers::pi / 2);
}

TEST(Detect, EmptySkyAndFarMarker) {
  EXPECT_FALSE(detect(GrayImage(640, 480, sensors::kSkyLuminance), kFront, world::MarkerSpec{}));
  EXPECT_FALSE(detect(ideal_view(25.0), kFront, world::MarkerSpec{}));
}

TEST(Detect, OverflowingMarkerIsNotDetected) {
  EXPECT_FALSE(detect(ideal_view(0.08), kFront, world::MarkerSpec{}));
}

TEST(Detect, IsPure) {
  const GrayImage img = ideal_view(6.3, 0.2);
  const auto a = detect(img, kFront, world::MarkerSpec{});
  const auto b = detect(img, kFront, world::MarkerSpec{});
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->position_cam, b->position_cam);
  EXPECT_EQ(a->ellipse.semi_major_px, b->ellipse.semi_major_px);
}

TEST(Detect, DistanceSweepMonotoneAndAccurate) {
  double previous = 0.0;
  int detected = 0;
  for (int d = 3;; ++d) {
    const auto det = detect(ideal_view(d), kFront, world::MarkerSpec{});
    if (!det) break;
    ++detected;
    EXPECT_GT(det->position_cam.z(), previous) << d;
    EXPECT_LE(std::abs(det->position_cam.z() - d) / d, 0.05) << d;
    previous = det->position_cam.z();
  }
  EXPECT_GE(detected, 5);
}

TEST(Detect, TiltRobustAtFiveMeters) {
  for (double deg : {0.0, 15.0, 30.0, 45.0})
    EXPECT_TRUE(detect(ideal_view(5.0, deg * std::numbers::pi / 180), kFront, world::MarkerSpec{})) << deg;
}

}  // namespace
}  // namespace lastmile::marker
