#pragma once

// Global cylindrical pose inside the pen: fixed-radius circle fit of the net
// points in the camera's horizontal plane, dead reckoning of the angular
// coordinate from DVL velocities, radius replacement and heading composition.

#include <optional>
#include <span>
#include <vector>

#include "netpen/geometry.hpp"

namespace netpen {

struct GlobalPose {
  double r = 0;      ///< radial distance from the pen axis [m]
  double theta = 0;  ///< angular coordinate [rad]
  double z = 0;      ///< depth, positive down [m]
  double psi = 0;    ///< global yaw of the optical axis [rad]
  double t = 0;      ///< timestamp [s]
};

inline Eigen::Isometry3d pen_from_camera(const GlobalPose& p) {
  return pen_from_camera(p.r, p.theta, p.z, p.psi);
}

/// Center is expressed in the camera horizontal plane as (x_cam, z_cam).
struct CircleFit {
  Point2 center = Point2::Zero();
  double rms_residual = 0;
  int iterations = 0;
  bool converged = false;
};

struct BodyVelocity {
  double vx = 0;  ///< forward [m/s]
  double vy = 0;  ///< starboard [m/s]
  double t = 0;
};

inline constexpr int kCircleMaxIterations = 50;
inline constexpr double kCircleStepTolerance = 1e-9;

/// Gauss-Newton on sum_i (|p_i - c| - R)^2 over the center only. A fit that
/// exhausts the iteration budget is returned with converged == false.
CircleFit fit_circle_fixed_radius(std::span<const Point2> points, double R, const Point2& init);

/// Free-radius algebraic (Kasa) circle fit; diagnostic only.
struct FreeCircle {
  Point2 center;
  double radius;
};
FreeCircle fit_circle_algebraic(std::span<const Point2> points);

struct CameraCylPose {
  double r_cam = 0;  ///< distance from the pen axis
  double beta = 0;   ///< relative heading, zero when facing radially outward
};

CameraCylPose camera_pose_from_fit(const CircleFit& fit, double R);

struct DeadReckoning {
  double r_pred = 0;
  double theta_next = 0;
};

DeadReckoning dead_reckon_step(const GlobalPose& prev, const BodyVelocity& v, double dt);

/// Projects camera-frame net points onto the horizontal plane as (x, z).
std::vector<Point2> horizontal_projection(std::span<const Point3> points);

/// Initial guess for the pen axis: centroid pushed by R along the
/// camera-facing horizontal normal of the plane through the points.
Point2 circle_initializer(std::span<const Point2> points, std::span<const Point3> points3d, double R);

struct FusionResult {
  GlobalPose pose;
  std::optional<CircleFit> fit;
  double r_pred = 0;       ///< dead-reckoned radius before replacement
  double r_fit = 0;        ///< circle-fit radius (== pose.r when not degraded)
  double beta = 0;
  bool degraded = false;   ///< circle fit unavailable, pose is pure dead reckoning
};

/// One fusion step. Never throws on fit failure; such frames are degraded.
FusionResult fuse_frame(const GlobalPose& prev, const BodyVelocity& v,
                        std::span<const Point3> net_points, double pressure_z, double R, double dt);

/// Sequential owner of the fused state. The first frame defines theta = 0.
class GlobalPoseTracker {
public:
  explicit GlobalPoseTracker(double pen_radius) : pen_radius_(pen_radius) {}

  FusionResult update(double t, const BodyVelocity& v, std::span<const Point3> net_points,
                      double pressure_z);

  const std::optional<GlobalPose>& current() const { return pose_; }

private:
  double pen_radius_;
  std::optional<GlobalPose> pose_;
};

}  // namespace netpen
