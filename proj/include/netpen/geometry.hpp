#pragma once

// Frames used throughout the library.
//
//   camera: x right, y down, z forward along the optical axis.
//   pen:    origin on the pen axis at the water surface, z down (equal to
//           pressure depth), angular coordinate theta = atan2(y, x).
//   body:   x forward (optical axis direction), y starboard. With roll and
//           pitch held at zero the camera y axis coincides with pen +z.
//
// The vehicle global yaw psi is the horizontal direction of the optical axis
// in the pen frame; facing the net radially outward means psi == theta.

#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "netpen/error.hpp"

namespace netpen {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

using Point2 = Vec2<double>;
using Point3 = Vec3<double>;

template <typename Scalar>
struct CameraIntrinsics {
  Scalar fx{};
  Scalar fy{};
  Scalar cx{};
  Scalar cy{};
  int width{};
  int height{};

  void validate() const {
    if (!(fx > 0) || !(fy > 0))
      throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw Error(ErrorCode::InvalidArgument, "image size must be positive");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
      throw Error(ErrorCode::InvalidArgument, "principal point outside image");
  }

  bool contains(Scalar u, Scalar v) const {
    return u >= 0 && v >= 0 && u < Scalar(width) && v < Scalar(height);
  }
};

using Camera = CameraIntrinsics<double>;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  constexpr Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi_v<Scalar>) a += two_pi;
  return a;
}

/// a - b, wrapped.
template <typename Scalar>
Scalar angle_diff(Scalar a, Scalar b) {
  return wrap_angle(a - b);
}

template <typename Scalar>
Vec3<Scalar> backproject(const CameraIntrinsics<Scalar>& K, Scalar u, Scalar v, Scalar depth) {
  if (!(depth > 0)) throw Error(ErrorCode::NonPositiveDepth, "depth must be > 0");
  if (!K.contains(u, v)) throw Error(ErrorCode::PixelOutOfBounds, "pixel outside image");
  return {(u - K.cx) * depth / K.fx, (v - K.cy) * depth / K.fy, depth};
}

/// Pinhole projection. The result may lie outside the image.
template <typename Scalar>
Vec2<Scalar> project(const CameraIntrinsics<Scalar>& K, const Vec3<Scalar>& p) {
  if (!(p.z() > 0)) throw Error(ErrorCode::BehindCamera, "point not in front of camera");
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

/// Unit-depth ray (x/z, y/z, 1) through a pixel; no bounds check.
template <typename Scalar>
Vec3<Scalar> pixel_ray(const CameraIntrinsics<Scalar>& K, Scalar u, Scalar v) {
  return {(u - K.cx) / K.fx, (v - K.cy) / K.fy, Scalar(1)};
}

template <typename Scalar>
struct Cylindrical {
  Scalar r{};
  Scalar theta{};
};

template <typename Scalar>
Cylindrical<Scalar> cart_to_cyl(const Vec2<Scalar>& p) {
  const Scalar r = std::hypot(p.x(), p.y());
  if (r == 0) return {Scalar(0), Scalar(0)};
  return {r, std::atan2(p.y(), p.x())};
}

template <typename Scalar>
Vec2<Scalar> cyl_to_cart(Scalar r, Scalar theta) {
  return {r * std::cos(theta), r * std::sin(theta)};
}

/// Rigid transform taking camera-frame points into the pen frame for a
/// vehicle at cylindrical (r, theta), depth z and global yaw psi.
template <typename Scalar>
Eigen::Transform<Scalar, 3, Eigen::Isometry> pen_from_camera(Scalar r, Scalar theta, Scalar z,
                                                             Scalar psi) {
  const Scalar c = std::cos(psi);
  const Scalar s = std::sin(psi);
  Eigen::Matrix<Scalar, 3, 3> rot;
  // columns: camera x (starboard), camera y (down), camera z (forward)
  rot << -s, 0, c,
          c, 0, s,
          0, 1, 0;
  Eigen::Transform<Scalar, 3, Eigen::Isometry> T = Eigen::Transform<Scalar, 3, Eigen::Isometry>::Identity();
  T.linear() = rot;
  T.translation() << r * std::cos(theta), r * std::sin(theta), z;
  return T;
}

/// Nearest positive intersection parameter of the ray origin + t * dir with
/// the infinite vertical cylinder of radius R about the pen axis.
template <typename Scalar>
std::optional<Scalar> intersect_cylinder(const Vec3<Scalar>& origin, const Vec3<Scalar>& dir,
                                         Scalar R) {
  const Scalar a = dir.x() * dir.x() + dir.y() * dir.y();
  if (a <= Scalar(1e-18)) return std::nullopt;
  const Scalar b = origin.x() * dir.x() + origin.y() * dir.y();
  const Scalar c = origin.x() * origin.x() + origin.y() * origin.y() - R * R;
  const Scalar disc = b * b - a * c;
  if (disc < 0) return std::nullopt;
  const Scalar sq = std::sqrt(disc);
  // Numerically stable root pair.
  const Scalar q = b >= 0 ? -(b + sq) : -(b - sq);
  Scalar t0 = q / a;
  Scalar t1 = q != 0 ? c / q : t0;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 > 0) return t0;
  if (t1 > 0) return t1;
  return std::nullopt;
}

template <typename Scalar>
constexpr Scalar deg2rad(Scalar d) {
  return d * std::numbers::pi_v<Scalar> / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad2deg(Scalar r) {
  return r * Scalar(180) / std::numbers::pi_v<Scalar>;
}

}  // namespace netpen
