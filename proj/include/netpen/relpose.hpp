#pragma once

// Net-relative pose from surface samples: weighted total-least-squares plane,
// weighted quadratic height field, and the closed-form DVL four-beam solution.

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "netpen/image.hpp"
#include "netpen/geometry.hpp"

namespace netpen {

struct NetRelativePose {
  double distance = 0;   ///< along the optical axis to the net surface [m]
  double yaw_rel = 0;    ///< rotation about camera y to face the net normal [rad]
  double pitch_rel = 0;  ///< rotation about camera x [rad]
};

/// Plane n . p + offset = 0 with the unit normal n facing the camera
/// (n.z < 0), so offset is the perpendicular distance from the camera.
struct PlaneFit {
  Point3 normal = Point3::UnitZ();
  double offset = 0;
  double rms_residual = 0;  ///< weighted rms orthogonal distance
  Point3 centroid = Point3::Zero();

  /// Depth at which the optical axis pierces the plane.
  double axis_depth() const { return -offset / normal.z(); }
};

/// z = a + b x + c y + d x^2 + e x y + f y^2
struct QuadFit {
  Eigen::Matrix<double, 6, 1> coefficients = Eigen::Matrix<double, 6, 1>::Zero();
  double rms_residual = 0;  ///< weighted rms residual along z
  double condition_number = 0;

  double operator()(double x, double y) const {
    const auto& k = coefficients;
    return k[0] + k[1] * x + k[2] * y + k[3] * x * x + k[4] * x * y + k[5] * y * y;
  }
};

/// Condition-number guard for the quadratic design matrix.
inline constexpr double kQuadMaxCondition = 1e8;

/// Weighted TLS plane. Empty weights mean uniform weights.
PlaneFit fit_plane(std::span<const Point3> points, std::span<const double> weights = {});

/// Weighted least squares on the six quadratic monomials of (x, y) predicting z.
QuadFit fit_quadratic(std::span<const Point3> points, std::span<const double> weights = {});

/// Weighted rms of z-residuals of the plane, comparable to QuadFit::rms_residual.
double plane_rms_along_z(const PlaneFit& plane, std::span<const Point3> points,
                         std::span<const double> weights = {});

/// Indices of points consistent with one plane. Each point is checked against
/// the plane fitted to the others; the one with the largest orthogonal residual
/// relative to its depth is dropped, repeated until all residuals are within
/// rel_tol or only min_keep points remain.
std::vector<std::size_t> plane_inliers(std::span<const Point3> points, std::span<const double> weights,
                                       double rel_tol, std::size_t min_keep = 6);

NetRelativePose relpose_from_plane(const PlaneFit& plane, double distance);

/// Distance from the quadratic at the optical axis when well conditioned,
/// otherwise from the plane; orientation from the plane normal.
NetRelativePose relpose_from_points(std::span<const Point3> points,
                                    std::span<const double> weights = {});

NetRelativePose relpose_from_depthmap(const DepthImage& depth, const Camera& K, int sample_stride);

/// Janus four-beam layout about the forward axis, all beams tilted by `tilt`.
struct DvlBeamGeometry {
  double tilt = deg2rad(30.0);

  /// Unit beam directions in the camera frame: port, starboard, up, down.
  std::array<Point3, 4> directions() const;
};

/// Ranges ordered as in DvlBeamGeometry::directions().
NetRelativePose relpose_from_dvl_beams(const std::array<double, 4>& ranges,
                                       const DvlBeamGeometry& geometry);

}  // namespace netpen
