#pragma once

// Synthetic net pen: analytic net texture on a vertical cylinder, ellipsoidal
// fish occluders, acoustic and inertial sensor models, and a net-following
// controller. Every random draw derives from a single scenario seed.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "netpen/geometry.hpp"
#include "netpen/globalpose.hpp"
#include "netpen/image.hpp"
#include "netpen/relpose.hpp"

namespace netpen {

/// Rope on the net, straight in the unrolled (arc angle, depth) surface
/// coordinates: vertical when theta0 == theta1, helical otherwise.
struct Rope {
  double theta0 = 0, z0 = 0;
  double theta1 = 0, z1 = 0;
  double width = 0.03;
};

struct PenWorld {
  double pen_radius = 25.0;
  double pen_depth = 20.0;
  double grid_cell = 0.02;
  double twine_width = 0.003;
  double water_attenuation = 0.12;
  std::vector<Rope> ropes;

  void validate() const;
  /// Point on the net at (theta, z).
  Point3 surface_point(double theta, double z) const;
};

struct Fish {
  double orbit_radius = 0;  ///< distance of the center from the pen axis
  double theta0 = 0;        ///< angular position at t = 0
  double angular_speed = 0; ///< rad/s about the pen axis
  double depth = 0;
  Eigen::Vector3d semi_axes{0.35, 0.08, 0.1};  ///< along-track, radial, vertical

  Point3 center(double t) const;
  /// Axes (along-track, radial, vertical) as matrix columns at time t.
  Eigen::Matrix3d frame(double t) const;
  /// Nearest positive ray parameter of origin + s * dir, dir need not be unit.
  std::optional<double> intersect(const Point3& origin, const Point3& dir, double t) const;
};

struct FishConfig {
  int count = 0;
  double min_wall_gap = 0.25;  ///< closest approach of a fish center to the net
  double max_wall_gap = 2.5;
  double min_depth = 1.0;
  double max_depth = 8.0;
  double speed = 0.6;          ///< m/s along the orbit
};

struct FishField {
  std::vector<Fish> fish;

  static FishField random(const PenWorld& world, const FishConfig& cfg, std::uint64_t seed);
  /// Nearest fish hit along a ray at time t.
  std::optional<double> intersect(const Point3& origin, const Point3& dir, double t) const;
};

struct SensorNoise {
  double dvl_velocity_sigma = 0.005;
  double dvl_range_sigma = 0.01;
  double echo_sigma = 0.01;
  double pressure_sigma = 0.0;
  double imu_yaw_drift_rate = 0.0;
  double fish_hit_probability = 0.0;

  void validate() const;
};

struct RenderSettings {
  double pixel_noise_sigma = 2.0;  ///< gray levels
};

struct RenderOutput {
  RgbImage image;
  DepthImage net_depth;  ///< analytic z-depth of the net where the ray reaches it
  DepthImage::Mask fish_mask;
};

/// Renders the view from a true pose. Deterministic for a given rng state.
RenderOutput render_frame(const PenWorld& world, const FishField& fish, double t,
                          const GlobalPose& pose, const Camera& K, const RenderSettings& settings,
                          std::mt19937_64& rng);

/// Ground-truth net-relative pose: optical-axis range to the net and the
/// orientation of the true surface normal at that point.
NetRelativePose true_relative_pose(const PenWorld& world, const GlobalPose& pose);

/// Slant range from the camera center along a camera-frame direction to the net.
std::optional<double> net_range(const PenWorld& world, const GlobalPose& pose, const Point3& dir_cam);

struct SensorFrame {
  int index = 0;
  double t = 0;
  RgbImage image;
  std::array<double, 4> dvl_beams{};
  BodyVelocity dvl_velocity;
  double echo_range = 0;
  double pressure_depth = 0;
  double imu_yaw = 0;

  GlobalPose truth;
  NetRelativePose truth_relative;
  std::array<double, 4> true_beams{};
  double true_echo = 0;
  std::array<bool, 4> beam_outlier{};
  bool echo_outlier = false;
};

/// Acoustic, pressure, inertial and velocity readings for a true state.
void sample_sensors(const PenWorld& world, const FishField& fish, const GlobalPose& pose,
                    const BodyVelocity& true_velocity, const DvlBeamGeometry& dvl,
                    const SensorNoise& noise, std::mt19937_64& rng, SensorFrame& out);

struct ControllerConfig {
  double gain = 0.5;                ///< 1/s, first-order radial distance loop
  double depth_gain = 0.5;          ///< 1/s
  double heading_amplitude = 0.05;  ///< rad, sinusoidal heading wander
  double heading_period = 25.0;     ///< s
};

struct Setpoint {
  double distance = 1.0;  ///< net distance [m]
  double speed = 0.0;     ///< along-net speed [m/s], positive increases theta
  double depth = 3.0;
};

struct VehicleState {
  double t = 0;
  Point2 position = Point2::Zero();  ///< pen frame, horizontal
  double z = 0;
  double psi = 0;

  GlobalPose pose() const;
};

struct ControllerStep {
  VehicleState next;
  BodyVelocity velocity;  ///< applied over the step, body frame at the starting heading
};

/// Kinematic net-following step: the radial distance to the net obeys
/// e_{k+1} = (1 - gain * dt) e_k, the vehicle moves along the net at the
/// commanded speed and the heading stays normal to the net up to the wander.
/// Settling within 0.02 m of a 1.1 m step takes ln(55) / gain (about 8 s).
ControllerStep step_controller(const PenWorld& world, const ControllerConfig& cfg,
                               const VehicleState& state, const Setpoint& sp, double dt);

}  // namespace netpen
