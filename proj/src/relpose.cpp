#include "netpen/relpose.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace netpen {

namespace {

Eigen::VectorXd normalized_weights(std::size_t n, std::span<const double> weights) {
  if (weights.empty()) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / n);
  if (weights.size() != n)
    throw Error(ErrorCode::InvalidArgument, "weights must match point count");
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] >= 0) || !std::isfinite(weights[i]))
      throw Error(ErrorCode::InvalidArgument, "weights must be finite and non-negative");
    w[static_cast<Eigen::Index>(i)] = weights[i];
    sum += weights[i];
  }
  if (!(sum > 0)) throw Error(ErrorCode::InvalidArgument, "weights sum to zero");
  return w / sum;
}

}  // namespace

PlaneFit fit_plane(std::span<const Point3> points, std::span<const double> weights) {
  if (points.size() < 3) throw Error(ErrorCode::InsufficientPoints, "plane fit needs >= 3 points");
  const Eigen::VectorXd w = normalized_weights(points.size(), weights);

  // Centroid accumulated relative to the first point so that a coordinate
  // shared by every point stays exactly zero after centering.
  const Point3 ref = points.front();
  Point3 shift = Point3::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) shift += w[i] * (points[i] - ref);
  const Point3 centroid = ref + shift;

  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point3 d = (points[i] - ref) - shift;
    scatter.noalias() += w[i] * d * d.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter);
  if (es.info() != Eigen::Success)
    throw Error(ErrorCode::DegeneratePoints, "scatter eigen-decomposition failed");
  if (es.eigenvalues()[1] <= 1e-12 * es.eigenvalues()[2])
    throw Error(ErrorCode::DegeneratePoints, "points are collinear");

  PlaneFit fit;
  fit.normal = es.eigenvectors().col(0).normalized();
  if (fit.normal.z() > 0 || (fit.normal.z() == 0 && fit.normal.dot(centroid) > 0))
    fit.normal = -fit.normal;
  fit.centroid = centroid;
  fit.offset = -fit.normal.dot(centroid);

  double ss = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = fit.normal.dot(points[i] - centroid);
    ss += w[i] * r * r;
  }
  fit.rms_residual = std::sqrt(ss);
  return fit;
}

QuadFit fit_quadratic(std::span<const Point3> points, std::span<const double> weights) {
  if (points.size() < 6)
    throw Error(ErrorCode::InsufficientPoints, "quadratic fit needs >= 6 points");
  const Eigen::VectorXd w = normalized_weights(points.size(), weights);
  const auto n = static_cast<Eigen::Index>(points.size());

  Eigen::Matrix<double, Eigen::Dynamic, 6> A(n, 6);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    const double s = std::sqrt(w[i]);
    A.row(i) << 1.0, p.x(), p.y(), p.x() * p.x(), p.x() * p.y(), p.y() * p.y();
    A.row(i) *= s;
    b[i] = s * p.z();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  QuadFit fit;
  fit.condition_number = sv[5] > 0 ? sv[0] / sv[5] : std::numeric_limits<double>::infinity();
  if (!(fit.condition_number <= kQuadMaxCondition))
    throw Error(ErrorCode::IllConditioned,
                "quadratic design condition number " + std::to_string(fit.condition_number));
  fit.coefficients = svd.solve(b);

  double ss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    const double r = p.z() - fit(p.x(), p.y());
    ss += w[i] * r * r;
  }
  fit.rms_residual = std::sqrt(ss);
  return fit;
}

std::vector<std::size_t> plane_inliers(std::span<const Point3> points, std::span<const double> weights,
                                       double rel_tol, std::size_t min_keep) {
  if (!(rel_tol > 0)) throw Error(ErrorCode::InvalidArgument, "rel_tol must be positive");
  if (!weights.empty() && weights.size() != points.size())
    throw Error(ErrorCode::DimensionMismatch, "weights and points differ in length");
  std::vector<std::size_t> keep(points.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
  min_keep = std::max<std::size_t>(min_keep, 3);
  std::vector<Point3> pts;
  std::vector<double> w;
  while (keep.size() > min_keep) {
    pts.clear();
    w.clear();
    for (auto i : keep) {
      pts.push_back(points[i]);
      if (!weights.empty()) w.push_back(weights[i]);
    }
    // residual of each point against the plane of all the others, so a
    // high-leverage outlier cannot hide by dragging the fit toward itself
    std::size_t worst = 0;
    double worst_rel = -1;
    std::vector<Point3> rest;
    std::vector<double> rest_w;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      rest.clear();
      rest_w.clear();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i == j) continue;
        rest.push_back(pts[i]);
        if (!w.empty()) rest_w.push_back(w[i]);
      }
      PlaneFit plane;
      try {
        plane = fit_plane(rest, rest_w);
      } catch (const Error&) {
        continue;
      }
      const double rel = std::abs(plane.normal.dot(pts[j]) + plane.offset) / std::abs(pts[j].z());
      if (rel > worst_rel) {
        worst_rel = rel;
        worst = j;
      }
    }
    if (worst_rel <= rel_tol) break;
    keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  return keep;
}

double plane_rms_along_z(const PlaneFit& plane, std::span<const Point3> points,
                         std::span<const double> weights) {
  const Eigen::VectorXd w = normalized_weights(points.size(), weights);
  double ss = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const double z = -(plane.offset + plane.normal.x() * p.x() + plane.normal.y() * p.y()) /
                     plane.normal.z();
    ss += w[i] * (p.z() - z) * (p.z() - z);
  }
  return std::sqrt(ss);
}

NetRelativePose relpose_from_plane(const PlaneFit& plane, double distance) {
  if (!(distance > 0) || !std::isfinite(distance))
    throw Error(ErrorCode::DegeneratePoints, "surface does not cross the optical axis ahead");
  const Point3& n = plane.normal;
  return {distance, std::atan2(n.x(), -n.z()), std::atan2(n.y(), -n.z())};
}

NetRelativePose relpose_from_points(std::span<const Point3> points,
                                    std::span<const double> weights) {
  const PlaneFit plane = fit_plane(points, weights);
  double distance = plane.axis_depth();
  if (points.size() >= 6) {
    try {
      distance = fit_quadratic(points, weights).coefficients[0];
    } catch (const Error& e) {
      if (e.code() != ErrorCode::IllConditioned) throw;
    }
  }
  return relpose_from_plane(plane, distance);
}

NetRelativePose relpose_from_depthmap(const DepthImage& depth, const Camera& K, int sample_stride) {
  if (sample_stride < 1) throw Error(ErrorCode::InvalidArgument, "sample_stride must be >= 1");
  if (depth.width() != K.width || depth.height() != K.height)
    throw Error(ErrorCode::DimensionMismatch, "depth image does not match intrinsics");
  std::vector<Point3> pts;
  for (int v = 0; v < depth.height(); v += sample_stride)
    for (int u = 0; u < depth.width(); u += sample_stride)
      if (depth.valid(v, u)) pts.push_back(backproject<double>(K, u, v, depth.values(v, u)));
  if (pts.size() < 3)
    throw Error(ErrorCode::TooFewValidPixels, "need >= 3 valid sampled pixels");
  return relpose_from_points(pts);
}

std::array<Point3, 4> DvlBeamGeometry::directions() const {
  const double s = std::sin(tilt);
  const double c = std::cos(tilt);
  return {Point3(-s, 0, c), Point3(s, 0, c), Point3(0, -s, c), Point3(0, s, c)};
}

NetRelativePose relpose_from_dvl_beams(const std::array<double, 4>& ranges,
                                       const DvlBeamGeometry& geometry) {
  for (double r : ranges)
    if (!(r > 0) || !std::isfinite(r))
      throw Error(ErrorCode::NonPositiveRange, "beam ranges must be positive");
  if (!(geometry.tilt > 0 && geometry.tilt < std::numbers::pi / 2))
    throw Error(ErrorCode::InvalidArgument, "beam tilt must lie in (0, pi/2)");

  // A plane m . p = D hit by beam b_i at range r_i satisfies (m / D) . b_i = 1 / r_i,
  // which is linear in q = m / D.
  const double s = std::sin(geometry.tilt);
  const double c = std::cos(geometry.tilt);
  const double i1 = 1 / ranges[0], i2 = 1 / ranges[1], i3 = 1 / ranges[2], i4 = 1 / ranges[3];
  const double qx = (i2 - i1) / (2 * s);
  const double qy = (i4 - i3) / (2 * s);
  const double qz_h = (i1 + i2) / (2 * c);
  const double qz_v = (i3 + i4) / (2 * c);
  const double qz = 0.5 * (qz_h + qz_v);

  NetRelativePose pose;
  pose.distance = 1 / qz;
  pose.yaw_rel = std::atan2(-qx, qz_h);
  pose.pitch_rel = std::atan2(-qy, qz_v);
  return pose;
}

}  // namespace netpen
