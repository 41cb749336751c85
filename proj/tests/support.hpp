#pragma once

// Hand-rolled generators and small oracles shared by the unit tests.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "netpen/geometry.hpp"
#include "netpen/globalpose.hpp"
#include "netpen/image.hpp"
#include "netpen/mapping.hpp"
#include "netpen/netfft.hpp"
#include "netpen/simpen.hpp"

namespace netpen::test {

inline Camera default_camera() { return {800, 800, 320, 240, 640, 480}; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(std::mt19937_64& rng, double sigma) {
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

/// Plane facing the camera: optical axis pierced at `distance`, tilted so
/// that yaw_rel = yaw and pitch_rel = pitch.
struct PlaneModel {
  double distance = 1.0;
  double yaw = 0.0;
  double pitch = 0.0;

  Point3 normal() const { return Point3(std::tan(yaw), std::tan(pitch), -1.0).normalized(); }
  double offset() const { return -normal().z() * distance; }
  /// Depth along the camera ray (xn, yn, 1).
  double depth_at(double xn, double yn) const {
    return -offset() / normal().dot(Point3(xn, yn, 1.0));
  }
};

/// Points of a plane model seen through the camera, optionally with Gaussian
/// noise along the ray.
inline std::vector<Point3> plane_points(const PlaneModel& plane, int count, std::mt19937_64& rng,
                                        double depth_noise = 0.0) {
  std::vector<Point3> pts;
  for (int i = 0; i < count; ++i) {
    const double xn = uniform(rng, -0.4, 0.4);
    const double yn = uniform(rng, -0.3, 0.3);
    const double z = plane.depth_at(xn, yn) + (depth_noise > 0 ? gaussian(rng, depth_noise) : 0.0);
    pts.emplace_back(xn * z, yn * z, z);
  }
  return pts;
}

inline PlaneModel random_plane(std::mt19937_64& rng) {
  return {uniform(rng, 0.5, 3.0), deg2rad(uniform(rng, -30.0, 30.0)), deg2rad(uniform(rng, -30.0, 30.0))};
}

/// Vehicle at `distance` from the net at angular coordinate theta, yawed by
/// yaw_offset from the outward normal.
inline GlobalPose facing_net(const PenWorld& world, double distance, double theta = 0.0,
                             double yaw_offset = 0.0, double z = 4.0) {
  return {world.pen_radius - distance, theta, z, wrap_angle(theta + yaw_offset), 0.0};
}

/// Separable cosine grid with the given pixel period.
inline GrayImage cosine_grid(int n, double period, double phase = 0.3) {
  GrayImage g(n, n);
  const double k = 2.0 * std::numbers::pi / period;
  for (int v = 0; v < n; ++v)
    for (int u = 0; u < n; ++u)
      g(v, u) = static_cast<float>(128.0 + 40.0 * std::cos(k * u + phase) + 40.0 * std::cos(k * v + 2 * phase));
  return g;
}

/// Analytic z-depth of the net through every pixel of a camera at `pose`.
inline double cylinder_depth(const PenWorld& world, const GlobalPose& pose, const Camera& K, double u,
                             double v) {
  const auto T = pen_from_camera(pose);
  const Point3 d = T.linear() * pixel_ray(K, u, v);
  const auto t = intersect_cylinder<double>(T.translation(), d, world.pen_radius);
  return t ? *t : std::nan("");
}

/// Points whose color is the rope's brown rather than the net's blue-green.
inline std::vector<Point3> rope_colored(const ColoredPointCloud& cloud) {
  std::vector<Point3> out;
  for (const auto& p : cloud.points)
    if (p.color[0] > p.color[1] + 20 && p.color[0] > p.color[2] + 30) out.push_back(p.position);
  return out;
}

/// Least-squares line s = a + b z through pen-frame points unrolled onto the
/// cylinder surface, s = R * theta.
struct UnrolledLine {
  double a = 0, b = 0;
  double s_at(double z) const { return a + b * z; }
  /// Perpendicular gap to another line at depth z.
  double gap(const UnrolledLine& o, double z) const {
    return std::abs(s_at(z) - o.s_at(z)) / std::sqrt(1 + b * b);
  }
};

inline UnrolledLine fit_unrolled_line(const std::vector<Point3>& pts, double R) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::VectorXd s(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    A.row(k) << 1.0, pts[i].z();
    s[k] = R * std::atan2(pts[i].y(), pts[i].x());
  }
  const Eigen::Vector2d x = A.colPivHouseholderQr().solve(s);
  return {x[0], x[1]};
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("netpen_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace netpen::test
