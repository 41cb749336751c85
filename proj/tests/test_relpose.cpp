#include <gtest/gtest.h>

#include "netpen/depthfill.hpp"
#include "netpen/relpose.hpp"
#include "netpen/simpen.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace netpen;

namespace {

std::array<double, 4> dvl_oracle(const test::PlaneModel& plane, const DvlBeamGeometry& g) {
  std::array<double, 4> r{};
  const auto dirs = g.directions();
  for (std::size_t i = 0; i < 4; ++i) r[i] = plane.offset() / -plane.normal().dot(dirs[i]);
  return r;
}

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& x : w) x = test::uniform(rng, 0.5, 20);
  return w;
}

TEST(FitPlane, FrontoParallel) {
  std::mt19937_64 rng(1);
  const auto pts = test::plane_points({1.5, 0, 0}, 20, rng);
  const PlaneFit fit = fit_plane(pts);
  EXPECT_NEAR((fit.normal - Point3(0, 0, -1)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(fit.axis_depth(), 1.5, 1e-12);
  EXPECT_NEAR(fit.offset, 1.5, 1e-12);
  EXPECT_NEAR(fit.rms_residual, 0.0, 1e-12);
}

TEST(FitPlane, TiltedPlaneYaw) {
  std::vector<Point3> pts;
  for (double x : {-0.3, -0.1, 0.0, 0.2, 0.4})
    for (double y : {-0.2, 0.0, 0.25}) pts.emplace_back(x, y, 1 + std::tan(deg2rad(10.0)) * x);
  const PlaneFit fit = fit_plane(pts);
  EXPECT_NEAR(rad2deg(std::atan2(fit.normal.x(), -fit.normal.z())), 10.0, 1e-6);
  EXPECT_NEAR(fit.axis_depth(), 1.0, 1e-12);
}

TEST(FitPlane, MatchesEigenOracleExactly) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto plane = test::random_plane(rng);
    const int n = 3 + static_cast<int>(rng() % 40);
    const auto pts = test::plane_points(plane, n, rng);
    const auto w = trial % 2 ? random_weights(rng, pts.size()) : std::vector<double>{};
    const PlaneFit fit = fit_plane(pts, w);
    const oracle::Plane o = oracle::tls_plane(pts, w);
    ASSERT_NEAR((fit.normal - o.normal).norm(), 0.0, 1e-9);
    ASSERT_NEAR(fit.offset, o.offset, 1e-9);
    ASSERT_NEAR(fit.normal.norm(), 1.0, 1e-9);
    ASSERT_LT(fit.normal.z(), 0);
    ASSERT_GE(fit.rms_residual, 0);
    ASSERT_NEAR((fit.normal - plane.normal()).norm(), 0.0, 1e-9);
  }
}

TEST(FitPlane, NoisyPointsStayNearTruth) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pts = test::plane_points({2.0, 0, 0}, 50, rng, 0.01);
    const PlaneFit fit = fit_plane(pts);
    const oracle::Plane o = oracle::tls_plane(pts, {});
    ASSERT_NEAR((fit.normal - o.normal).norm(), 0.0, 1e-9);
    EXPECT_LT(rad2deg(std::acos(std::min(1.0, -fit.normal.z()))), 1.0);
    EXPECT_NEAR(fit.offset, 2.0, 0.005);
  }
}

TEST(FitPlane, Errors) {
  try {
    fit_plane(std::vector<Point3>{{0, 0, 1}, {1, 0, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
  try {
    fit_plane(std::vector<Point3>{{0, 0, 1}, {1, 1, 2}, {2, 2, 3}, {-1, -1, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegeneratePoints);
  }
}

TEST(FitQuadratic, ExactMemberOfModel) {
  std::vector<Point3> pts;
  for (double x = -0.5; x <= 0.5; x += 0.1)
    for (double y = -0.4; y <= 0.4; y += 0.2) pts.emplace_back(x, y, 2 + 0.1 * x * x);
  const QuadFit q = fit_quadratic(pts);
  Eigen::Matrix<double, 6, 1> expect;
  expect << 2, 0, 0, 0.1, 0, 0;
  EXPECT_LT((q.coefficients - expect).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(q.rms_residual, 0, 1e-9);
}

TEST(FitQuadratic, PlaneHasNoCurvature) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = test::plane_points({1.2, deg2rad(8.0), deg2rad(-4.0)}, 30, rng);
    // a plane z(x, y) is linear in camera x and y
    const QuadFit q = fit_quadratic(pts);
    EXPECT_LT(q.coefficients.tail<3>().cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(FitQuadratic, CylinderFitsBetterThanPlane) {
  PenWorld world;
  const Camera K = test::default_camera();
  const GlobalPose pose = test::facing_net(world, 1.0, 0.0, deg2rad(3.0));
  std::vector<Point3> pts;
  for (int v = 20; v < 480; v += 40)
    for (int u = 20; u < 640; u += 40) pts.push_back(backproject<double>(K, u, v, test::cylinder_depth(world, pose, K, u, v)));
  const QuadFit q = fit_quadratic(pts);
  const PlaneFit p = fit_plane(pts);
  EXPECT_LT(q.rms_residual, plane_rms_along_z(p, pts));
  EXPECT_GT(plane_rms_along_z(p, pts), 0);
}

TEST(FitQuadratic, Errors) {
  std::mt19937_64 rng(5);
  auto pts = test::plane_points({1, 0, 0}, 5, rng);
  try {
    fit_quadratic(pts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
  // all samples on one vertical line: x^2 and x columns are constant multiples
  std::vector<Point3> line;
  for (int i = 0; i < 12; ++i) line.emplace_back(0.1, 0.05 * i, 1.0 + 0.01 * i);
  try {
    fit_quadratic(line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IllConditioned);
  }
}

TEST(RelposeFromPoints, Examples) {
  std::mt19937_64 rng(6);
  auto rel = relpose_from_points(test::plane_points({1.0, 0, 0}, 15, rng));
  EXPECT_NEAR(rel.distance, 1.0, 1e-9);
  EXPECT_NEAR(rel.yaw_rel, 0.0, 1e-9);
  EXPECT_NEAR(rel.pitch_rel, 0.0, 1e-9);

  std::vector<Point3> pts;
  for (double x : {-0.3, -0.1, 0.0, 0.2, 0.4})
    for (double y : {-0.2, 0.0, 0.25}) pts.emplace_back(x, y, 1 + std::tan(deg2rad(10.0)) * x);
  rel = relpose_from_points(pts);
  EXPECT_NEAR(rad2deg(rel.yaw_rel), 10.0, 1e-6);
  EXPECT_NEAR(rel.pitch_rel, 0.0, 1e-9);
  EXPECT_NEAR(rel.distance, 1.0, 1e-9);
}

TEST(RelposeFromPoints, RandomPlanesRecoverPose) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto plane = test::random_plane(rng);
    const auto rel = relpose_from_points(test::plane_points(plane, 15, rng));
    ASSERT_NEAR(rel.distance, plane.distance, 1e-6);
    ASSERT_NEAR(rel.yaw_rel, plane.yaw, 1e-9);
    ASSERT_NEAR(rel.pitch_rel, plane.pitch, 1e-9);
  }
}

TEST(RelposeFromPoints, SimulatorFrameYawedOffNormal) {
  PenWorld world;
  const Camera K = test::default_camera();
  const GlobalPose pose = test::facing_net(world, 2.1, 0.3, deg2rad(5.0));
  std::mt19937_64 rng(8);
  const auto out = render_frame(world, {}, 0, pose, K, {}, rng);
  const auto pts = priors_to_points(extract_priors(to_gray(out.image), K, {}), K);
  const auto rel = relpose_from_points(pts.points, pts.weights);
  const auto truth = true_relative_pose(world, pose);
  EXPECT_NEAR(rel.distance / truth.distance, 1.0, 0.05);
  EXPECT_NEAR(rad2deg(rel.yaw_rel), rad2deg(truth.yaw_rel), 1.0);
  EXPECT_NEAR(rad2deg(rel.pitch_rel), rad2deg(truth.pitch_rel), 1.0);
}

TEST(RelposeProperties, YawEquivariance) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const test::PlaneModel plane{test::uniform(rng, 0.6, 2.5), deg2rad(test::uniform(rng, -20, 20)), 0.0};
    const auto pts = test::plane_points(plane, 15, rng);
    const double alpha = deg2rad(test::uniform(rng, -15, 15));
    const Eigen::Matrix3d Ry = Eigen::AngleAxisd(alpha, Point3::UnitY()).toRotationMatrix();
    std::vector<Point3> rotated;
    for (const auto& p : pts) rotated.push_back(Ry * p);
    const auto a = relpose_from_points(pts);
    const auto b = relpose_from_points(rotated);
    ASSERT_NEAR(b.yaw_rel, a.yaw_rel - alpha, 1e-6);
    ASSERT_NEAR(b.pitch_rel, 0.0, 1e-6);
    // the plane's perpendicular distance is invariant, so the axial distance follows cos(yaw)
    ASSERT_NEAR(b.distance * std::cos(b.yaw_rel), a.distance * std::cos(a.yaw_rel), 1e-6);
  }
}

TEST(RelposeProperties, NestedResidual) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 6 + static_cast<int>(rng() % 30);
    std::vector<Point3> pts;
    for (int i = 0; i < n; ++i) {
      const double x = test::uniform(rng, -1, 1), y = test::uniform(rng, -1, 1);
      pts.emplace_back(x, y, 2 + 0.3 * x + 0.2 * x * y + test::gaussian(rng, 0.05));
    }
    const auto w = random_weights(rng, pts.size());
    QuadFit q;
    try {
      q = fit_quadratic(pts, w);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::IllConditioned);
      continue;
    }
    const PlaneFit p = fit_plane(pts, w);
    ASSERT_LE(q.rms_residual, plane_rms_along_z(p, pts, w) + 1e-12);
    ASSERT_TRUE(q.coefficients.allFinite());
  }
}

TEST(RelposeProperties, WeightScaleInvariance) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pts = test::plane_points(test::random_plane(rng), 20, rng, 0.01);
    auto w = random_weights(rng, pts.size());
    const double k = std::exp(test::uniform(rng, -5, 5));
    std::vector<double> wk;
    for (double x : w) wk.push_back(k * x);
    const PlaneFit a = fit_plane(pts, w), b = fit_plane(pts, wk);
    ASSERT_NEAR((a.normal - b.normal).norm(), 0, 1e-12);
    ASSERT_NEAR(a.offset, b.offset, 1e-12);
    ASSERT_NEAR(a.rms_residual, b.rms_residual, 1e-12);
    const QuadFit qa = fit_quadratic(pts, w), qb = fit_quadratic(pts, wk);
    ASSERT_LT((qa.coefficients - qb.coefficients).cwiseAbs().maxCoeff(), 1e-12 * (1 + qa.coefficients.cwiseAbs().maxCoeff()));
    const auto ra = relpose_from_points(pts, w), rb = relpose_from_points(pts, wk);
    ASSERT_NEAR(ra.distance, rb.distance, 1e-12);
    ASSERT_NEAR(ra.yaw_rel, rb.yaw_rel, 1e-12);
    ASSERT_NEAR(ra.pitch_rel, rb.pitch_rel, 1e-12);
  }
}

TEST(PlaneInliers, DropsGrossOutliersOnly) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto plane = test::random_plane(rng);
    auto pts = test::plane_points(plane, 15, rng, 0.002 * plane.distance);
    std::vector<double> w(pts.size(), 1.0);
    EXPECT_EQ(plane_inliers(pts, w, 0.03).size(), pts.size());
    const std::size_t bad = rng() % pts.size();
    pts[bad] *= test::uniform(rng, 0, 1) < 0.5 ? 0.8 : 1.25;
    const auto keep = plane_inliers(pts, w, 0.03);
    ASSERT_EQ(keep.size(), pts.size() - 1);
    EXPECT_EQ(std::find(keep.begin(), keep.end(), bad), keep.end());
  }
  EXPECT_THROW(plane_inliers(std::vector<Point3>{{0, 0, 1}}, {}, 0.0), Error);
}

TEST(RelposeFromDepthmap, Examples) {
  const Camera K = test::default_camera();
  DepthImage d(640, 480);
  d.values.setConstant(2.1);
  d.valid.setConstant(true);
  auto rel = relpose_from_depthmap(d, K, 8);
  EXPECT_NEAR(rel.distance, 2.1, 1e-9);
  EXPECT_NEAR(rel.yaw_rel, 0, 1e-9);
  EXPECT_NEAR(rel.pitch_rel, 0, 1e-9);

  const test::PlaneModel plane{1.0, deg2rad(10.0), 0.0};
  for (int v = 0; v < 480; ++v)
    for (int u = 0; u < 640; ++u) d.values(v, u) = plane.depth_at((u - K.cx) / K.fx, (v - K.cy) / K.fy);
  rel = relpose_from_depthmap(d, K, 8);
  EXPECT_NEAR(rad2deg(rel.yaw_rel), 10.0, 1e-6);
  EXPECT_NEAR(rel.distance, 1.0, 1e-6);
}

TEST(RelposeFromDepthmap, TooFewValidPixels) {
  DepthImage d(640, 480);
  d.values.setConstant(1.0);
  d.valid(0, 0) = d.valid(0, 8) = true;
  try {
    relpose_from_depthmap(d, test::default_camera(), 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewValidPixels);
  }
}

TEST(RelposeFromDepthmap, CompletedDepthAgreesWithPointPath) {
  PenWorld world;
  const Camera K = test::default_camera();
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 4; ++trial) {
    const GlobalPose pose = test::facing_net(world, test::uniform(rng, 0.8, 2.2), 0.1 * trial,
                                             deg2rad(test::uniform(rng, -6, 6)));
    const auto out = render_frame(world, {}, 0, pose, K, {}, rng);
    const auto priors = extract_priors(to_gray(out.image), K, {});
    const auto pts = priors_to_points(priors, K);
    const auto a = relpose_from_points(pts.points, pts.weights);
    const auto b = relpose_from_depthmap(complete_depth(640, 480, priors, K), K, 8);
    EXPECT_NEAR(a.distance, b.distance, 0.02);
    EXPECT_NEAR(rad2deg(a.yaw_rel), rad2deg(b.yaw_rel), 1.0);
    EXPECT_NEAR(rad2deg(a.pitch_rel), rad2deg(b.pitch_rel), 1.0);
  }
}

TEST(RelposeFromDvl, EqualRangesFaceTheNet) {
  const auto rel = relpose_from_dvl_beams({1.3, 1.3, 1.3, 1.3}, {});
  EXPECT_EQ(rel.yaw_rel, 0.0);
  EXPECT_EQ(rel.pitch_rel, 0.0);
  EXPECT_NEAR(rel.distance, 1.3 * std::cos(deg2rad(30.0)), 1e-12);
}

TEST(RelposeFromDvl, RayPlaneOracle) {
  const DvlBeamGeometry g;
  auto rel = relpose_from_dvl_beams(dvl_oracle({1.0, deg2rad(10.0), 0.0}, g), g);
  EXPECT_NEAR(rel.yaw_rel, deg2rad(10.0), 1e-9);
  EXPECT_NEAR(rel.pitch_rel, 0.0, 1e-9);
  EXPECT_NEAR(rel.distance, 1.0, 1e-9);

  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 500; ++trial) {
    DvlBeamGeometry gt;
    gt.tilt = deg2rad(test::uniform(rng, 15, 40));
    const test::PlaneModel plane{test::uniform(rng, 0.5, 3), deg2rad(test::uniform(rng, -25, 25)),
                                 deg2rad(test::uniform(rng, -25, 25))};
    rel = relpose_from_dvl_beams(dvl_oracle(plane, gt), gt);
    ASSERT_NEAR(rel.yaw_rel, plane.yaw, 1e-9);
    ASSERT_NEAR(rel.pitch_rel, plane.pitch, 1e-9);
    ASSERT_NEAR(rel.distance, plane.distance, 1e-9);
  }
}

TEST(RelposeFromDvl, FishHitCorruptsYaw) {
  const DvlBeamGeometry g;
  auto r = dvl_oracle({1.0, deg2rad(10.0), 0.0}, g);
  r[0] *= 0.3;
  const auto rel = relpose_from_dvl_beams(r, g);
  EXPECT_GT(std::abs(rad2deg(rel.yaw_rel) - 10.0), 5.0);
}

TEST(RelposeFromDvl, NonPositiveRange) {
  for (double bad : {0.0, -1.0, std::nan("")}) {
    try {
      relpose_from_dvl_beams({1, 1, bad, 1}, {});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NonPositiveRange);
    }
  }
}

}  // namespace
