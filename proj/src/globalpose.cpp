#include "netpen/globalpose.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "netpen/relpose.hpp"

namespace netpen {

namespace {

double circle_cost(std::span<const Point2> points, const Point2& c, double R) {
  double ss = 0;
  for (const auto& p : points) {
    const double r = (p - c).norm() - R;
    ss += r * r;
  }
  return ss;
}

}  // namespace

CircleFit fit_circle_fixed_radius(std::span<const Point2> points, double R, const Point2& init) {
  if (points.size() < 3) throw Error(ErrorCode::InsufficientPoints, "circle fit needs >= 3 points");
  if (!(R > 0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");

  CircleFit fit;
  Point2 c = init;
  Point2 best = c;
  double best_cost = circle_cost(points, c, R);
  for (int it = 1; it <= kCircleMaxIterations; ++it) {
    Eigen::Matrix2d JtJ = Eigen::Matrix2d::Zero();
    Eigen::Vector2d Jtr = Eigen::Vector2d::Zero();
    for (const auto& p : points) {
      const Point2 d = p - c;
      const double dist = d.norm();
      if (dist == 0) continue;
      const Eigen::Vector2d J = -d / dist;
      JtJ.noalias() += J * J.transpose();
      Jtr += J * (dist - R);
    }
    const Eigen::LDLT<Eigen::Matrix2d> ldlt(JtJ);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0)) break;
    const Eigen::Vector2d step = ldlt.solve(-Jtr);
    if (!step.allFinite()) break;
    c += step;
    fit.iterations = it;
    const double cost = circle_cost(points, c, R);
    if (cost <= best_cost) {
      best_cost = cost;
      best = c;
    }
    if (step.norm() < kCircleStepTolerance) {
      fit.converged = true;
      best = c;
      best_cost = cost;
      break;
    }
  }
  fit.center = best;
  fit.rms_residual = std::sqrt(best_cost / static_cast<double>(points.size()));
  return fit;
}

FreeCircle fit_circle_algebraic(std::span<const Point2> points) {
  if (points.size() < 3) throw Error(ErrorCode::InsufficientPoints, "circle fit needs >= 3 points");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    A.row(i) << p.x(), p.y(), 1.0;
    b[i] = -(p.x() * p.x() + p.y() * p.y());
  }
  const Eigen::Vector3d s = A.colPivHouseholderQr().solve(b);
  const Point2 center(-s[0] / 2, -s[1] / 2);
  return {center, std::sqrt(std::max(center.squaredNorm() - s[2], 0.0))};
}

CameraCylPose camera_pose_from_fit(const CircleFit& fit, double R) {
  if (!fit.converged) throw Error(ErrorCode::NotConverged, "circle fit did not converge");
  if (!(R > 0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  const double r_cam = fit.center.norm();
  if (r_cam < 1e-6) throw Error(ErrorCode::DegenerateCenter, "camera on the pen axis");
  return {r_cam, std::atan2(fit.center.x(), -fit.center.y())};
}

DeadReckoning dead_reckon_step(const GlobalPose& prev, const BodyVelocity& v, double dt) {
  if (!(dt > 0)) throw Error(ErrorCode::NonPositiveDt, "dt must be positive");
  const double c = std::cos(prev.psi);
  const double s = std::sin(prev.psi);
  const Point2 v_pen(v.vx * c - v.vy * s, v.vx * s + v.vy * c);
  const Point2 pos = cyl_to_cart(prev.r, prev.theta) + v_pen * dt;
  const auto cyl = cart_to_cyl(pos);
  return {cyl.r, cyl.theta};
}

std::vector<Point2> horizontal_projection(std::span<const Point3> points) {
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const auto& p : points) out.emplace_back(p.x(), p.z());
  return out;
}

Point2 circle_initializer(std::span<const Point2> points, std::span<const Point3> points3d, double R) {
  Point2 mean = Point2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());

  Point2 toward_camera = -mean;
  try {
    const PlaneFit plane = fit_plane(points3d);
    const Point2 n(plane.normal.x(), plane.normal.z());
    if (n.norm() > 1e-6) toward_camera = n;
  } catch (const Error&) {
  }
  if (toward_camera.norm() == 0) toward_camera = Point2(0, -1);
  return mean + R * toward_camera.normalized();
}

FusionResult fuse_frame(const GlobalPose& prev, const BodyVelocity& v,
                        std::span<const Point3> net_points, double pressure_z, double R, double dt) {
  const DeadReckoning dr = dead_reckon_step(prev, v, dt);

  FusionResult out;
  out.r_pred = dr.r_pred;
  out.pose.theta = dr.theta_next;
  out.pose.z = pressure_z;
  out.pose.t = prev.t + dt;

  try {
    const auto pts = horizontal_projection(net_points);
    const Point2 init = circle_initializer(pts, net_points, R);
    const CircleFit fit = fit_circle_fixed_radius(pts, R, init);
    out.fit = fit;
    const CameraCylPose cam = camera_pose_from_fit(fit, R);
    if (!(cam.r_cam < R)) throw Error(ErrorCode::PoseOutsidePen, "fit places camera outside pen");
    out.r_fit = cam.r_cam;
    out.beta = cam.beta;
    out.pose.r = cam.r_cam;
    out.pose.psi = wrap_angle(dr.theta_next + cam.beta);
  } catch (const Error&) {
    // Hold the last relative heading and keep the integrated radius.
    out.degraded = true;
    out.beta = angle_diff(prev.psi, prev.theta);
    out.r_fit = std::numeric_limits<double>::quiet_NaN();
    out.pose.r = dr.r_pred;
    out.pose.psi = wrap_angle(dr.theta_next + out.beta);
  }
  return out;
}

FusionResult GlobalPoseTracker::update(double t, const BodyVelocity& v,
                                       std::span<const Point3> net_points, double pressure_z) {
  if (pose_) {
    FusionResult res = fuse_frame(*pose_, v, net_points, pressure_z, pen_radius_, t - pose_->t);
    res.pose.t = t;
    pose_ = res.pose;
    return res;
  }

  // First frame: the angular coordinate is defined as zero.
  FusionResult res;
  res.pose.t = t;
  res.pose.z = pressure_z;
  try {
    const auto pts = horizontal_projection(net_points);
    const CircleFit fit = fit_circle_fixed_radius(pts, pen_radius_, circle_initializer(pts, net_points, pen_radius_));
    res.fit = fit;
    const CameraCylPose cam = camera_pose_from_fit(fit, pen_radius_);
    if (!(cam.r_cam < pen_radius_)) throw Error(ErrorCode::PoseOutsidePen, "fit outside pen");
    res.pose.r = cam.r_cam;
    res.pose.psi = wrap_angle(cam.beta);
    res.r_pred = res.r_fit = cam.r_cam;
    res.beta = cam.beta;
    pose_ = res.pose;
  } catch (const Error&) {
    res.degraded = true;
    res.r_pred = res.r_fit = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

}  // namespace netpen
