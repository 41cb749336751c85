#include "netpen/simpen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace netpen {

namespace {

constexpr std::array<double, 3> kThroughNet{70, 140, 150};
constexpr std::array<double, 3> kTwine{20, 30, 25};
constexpr std::array<double, 3> kRope{110, 55, 15};
constexpr std::array<double, 3> kFish{170, 175, 180};
constexpr std::array<double, 3> kOpenWater{10, 25, 35};

// Fraction of [x - fp/2, x + fp/2] covered by pulses of width w centered on
// multiples of L.
double pulse_coverage(double x, double fp, double L, double w) {
  auto cumulative = [&](double y) {
    y += 0.5 * w;
    const double k = std::floor(y / L);
    return k * w + std::min(y - k * L, w);
  };
  if (fp < 1e-9) {
    const double f = x - L * std::round(x / L);
    return std::abs(f) < 0.5 * w ? 1.0 : 0.0;
  }
  return std::clamp((cumulative(x + 0.5 * fp) - cumulative(x - 0.5 * fp)) / fp, 0.0, 1.0);
}

void require_inside(const PenWorld& world, const GlobalPose& pose) {
  if (!(pose.r >= 0 && pose.r < world.pen_radius) || !std::isfinite(pose.theta) ||
      !std::isfinite(pose.psi))
    throw Error(ErrorCode::PoseOutsidePen, "pose outside the pen");
  if (!(pose.z >= 0 && pose.z <= world.pen_depth))
    throw Error(ErrorCode::PoseOutsidePen, "pose depth outside the pen");
}

struct RopeGeom {
  double theta0, z0;
  Eigen::Vector2d dir;  // unit, unrolled
  double length;
  double half_width;
};

// Maps pen coordinates onto the unit sphere of a fish body at a fixed time.
struct FishBody {
  Eigen::Matrix3d M;
  Point3 center;
};

FishBody fish_body(const Fish& f, double t) {
  Eigen::Matrix3d M = f.frame(t).transpose();
  M.array().colwise() /= f.semi_axes.array();
  return {M, f.center(t)};
}

// Nearest positive s with |q + s e| = 1.
std::optional<double> unit_sphere_hit(const Point3& q, const Point3& e) {
  const double a = e.squaredNorm();
  const double b = q.dot(e);
  const double c = q.squaredNorm() - 1.0;
  const double disc = b * b - a * c;
  if (a <= 0 || disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double s0 = (-b - sq) / a;
  const double s1 = (-b + sq) / a;
  if (s0 > 0) return s0;
  if (s1 > 0) return s1;
  return std::nullopt;
}

struct FishCandidate {
  const Fish* fish;
  int u0, u1, v0, v1;
  FishBody body;
  Point3 q;  // camera origin in unit-sphere coordinates
};

double luma_shade(const Point3& normal, const Point3& view) {
  return 0.45 + 0.55 * std::abs(normal.normalized().dot(view));
}

}  // namespace

void PenWorld::validate() const {
  if (!(pen_radius > 1)) throw Error(ErrorCode::InvalidArgument, "pen_radius must exceed 1 m");
  if (!(pen_depth > 0)) throw Error(ErrorCode::InvalidArgument, "pen_depth must be positive");
  if (!(grid_cell > 0 && grid_cell < 0.1))
    throw Error(ErrorCode::InvalidArgument, "grid_cell must lie in (0, 0.1)");
  if (!(twine_width > 0 && twine_width < grid_cell))
    throw Error(ErrorCode::InvalidArgument, "twine_width must lie in (0, grid_cell)");
  if (!(water_attenuation >= 0)) throw Error(ErrorCode::InvalidArgument, "attenuation must be >= 0");
  for (const auto& r : ropes)
    if (!(r.width > 0)) throw Error(ErrorCode::InvalidArgument, "rope width must be positive");
}

Point3 PenWorld::surface_point(double theta, double z) const {
  return {pen_radius * std::cos(theta), pen_radius * std::sin(theta), z};
}

Point3 Fish::center(double t) const {
  const double phi = theta0 + angular_speed * t;
  return {orbit_radius * std::cos(phi), orbit_radius * std::sin(phi), depth};
}

Eigen::Matrix3d Fish::frame(double t) const {
  const double phi = theta0 + angular_speed * t;
  Eigen::Matrix3d F;
  F.col(0) << -std::sin(phi), std::cos(phi), 0;
  F.col(1) << std::cos(phi), std::sin(phi), 0;
  F.col(2) << 0, 0, 1;
  return F;
}

std::optional<double> Fish::intersect(const Point3& origin, const Point3& dir, double t) const {
  const FishBody body = fish_body(*this, t);
  return unit_sphere_hit(body.M * (origin - body.center), body.M * dir);
}

FishField FishField::random(const PenWorld& world, const FishConfig& cfg, std::uint64_t seed) {
  world.validate();
  if (cfg.count < 0) throw Error(ErrorCode::InvalidArgument, "fish count must be >= 0");
  if (!(cfg.min_wall_gap > 0.15 && cfg.max_wall_gap >= cfg.min_wall_gap &&
        cfg.max_wall_gap < world.pen_radius - 0.5))
    throw Error(ErrorCode::InvalidArgument, "fish wall gaps must satisfy 0.15 < min <= max < R - 0.5");
  if (!(cfg.min_depth >= 0 && cfg.max_depth >= cfg.min_depth && cfg.max_depth <= world.pen_depth))
    throw Error(ErrorCode::InvalidArgument, "fish depth band outside the pen");
  if (!(cfg.speed >= 0)) throw Error(ErrorCode::InvalidArgument, "fish speed must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FishField field;
  field.fish.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    Fish f;
    const double gap = cfg.min_wall_gap + (cfg.max_wall_gap - cfg.min_wall_gap) * unit(rng);
    f.orbit_radius = world.pen_radius - gap;
    f.theta0 = std::numbers::pi * (2.0 * unit(rng) - 1.0);
    const double speed = cfg.speed * (0.7 + 0.6 * unit(rng));
    f.angular_speed = (unit(rng) < 0.5 ? -1.0 : 1.0) * speed / f.orbit_radius;
    f.depth = cfg.min_depth + (cfg.max_depth - cfg.min_depth) * unit(rng);
    const double half_length = 0.15 + 0.1 * unit(rng);
    // Radial semi-axis stays below the minimum wall gap so the body never
    // crosses the net.
    f.semi_axes << half_length, std::min(0.3 * half_length, cfg.min_wall_gap - 0.05),
        0.35 * half_length;
    field.fish.push_back(f);
  }
  return field;
}

std::optional<double> FishField::intersect(const Point3& origin, const Point3& dir, double t) const {
  std::optional<double> best;
  for (const auto& f : fish)
    if (auto s = f.intersect(origin, dir, t); s && (!best || *s < *best)) best = s;
  return best;
}

void SensorNoise::validate() const {
  for (double s : {dvl_velocity_sigma, dvl_range_sigma, echo_sigma, pressure_sigma})
    if (!(s >= 0)) throw Error(ErrorCode::InvalidArgument, "noise sigmas must be >= 0");
  if (!std::isfinite(imu_yaw_drift_rate))
    throw Error(ErrorCode::InvalidArgument, "imu drift rate must be finite");
  if (!(fish_hit_probability >= 0 && fish_hit_probability <= 1))
    throw Error(ErrorCode::InvalidArgument, "fish_hit_probability must lie in [0, 1]");
}

RenderOutput render_frame(const PenWorld& world, const FishField& fish, double t,
                          const GlobalPose& pose, const Camera& K, const RenderSettings& settings,
                          std::mt19937_64& rng) {
  world.validate();
  K.validate();
  require_inside(world, pose);
  if (!(settings.pixel_noise_sigma >= 0))
    throw Error(ErrorCode::InvalidArgument, "pixel noise sigma must be >= 0");

  const auto T = pen_from_camera(pose);
  const Eigen::Matrix3d Rm = T.linear();
  const Point3 o = T.translation();
  const double R = world.pen_radius;
  const double L = world.grid_cell;

  // Visible window of the net in unrolled coordinates, sampled along the
  // image border, used to cull ropes.
  const double theta_c = std::atan2(o.y() + Rm(1, 2), o.x() + Rm(0, 2));
  double lo = 1e300, hi = -1e300, zlo = 1e300, zhi = -1e300;
  for (int i = 0; i <= 16; ++i) {
    const double a = i / 16.0;
    for (const auto& uv : {Point2(a * (K.width - 1), 0), Point2(a * (K.width - 1), K.height - 1),
                           Point2(0, a * (K.height - 1)), Point2(K.width - 1, a * (K.height - 1))}) {
      const Point3 d = Rm * pixel_ray(K, uv.x(), uv.y());
      const auto s = intersect_cylinder(o, d, R);
      if (!s) {
        lo = -std::numbers::pi, hi = std::numbers::pi;
        continue;
      }
      const Point3 p = o + *s * d;
      const double rel = angle_diff(std::atan2(p.y(), p.x()), theta_c);
      lo = std::min(lo, rel), hi = std::max(hi, rel);
      zlo = std::min(zlo, p.z()), zhi = std::max(zhi, p.z());
    }
  }

  std::vector<RopeGeom> ropes;
  for (const auto& rope : world.ropes) {
    const Eigen::Vector2d d(R * (rope.theta1 - rope.theta0), rope.z1 - rope.z0);
    const double len = d.norm();
    const double margin = rope.width / R + 1e-3;
    // Angular extent of the rope restricted to the visible depth band.
    double ta = rope.theta0, tb = rope.theta1;
    if (rope.z1 != rope.z0) {
      const double fa = std::clamp((zlo - rope.z0) / (rope.z1 - rope.z0), 0.0, 1.0);
      const double fb = std::clamp((zhi - rope.z0) / (rope.z1 - rope.z0), 0.0, 1.0);
      ta = rope.theta0 + fa * (rope.theta1 - rope.theta0);
      tb = rope.theta0 + fb * (rope.theta1 - rope.theta0);
    } else if (rope.z0 < zlo - rope.width || rope.z0 > zhi + rope.width) {
      continue;
    }
    const double ra = angle_diff(ta, theta_c);
    const double rb = ra + (tb - ta);
    if (std::max(ra, rb) < lo - margin || std::min(ra, rb) > hi + margin) continue;
    ropes.push_back({rope.theta0, rope.z0, len > 0 ? Eigen::Vector2d(d / len) : Eigen::Vector2d(0, 1),
                     len, 0.5 * rope.width});
  }

  // Fish culled to their projected bounding boxes.
  std::vector<FishCandidate> candidates;
  for (const auto& f : fish.fish) {
    const Point3 c = Rm.transpose() * (f.center(t) - o);
    const double rmax = f.semi_axes.maxCoeff();
    if (c.z() <= -rmax || c.norm() - rmax > 2.0 * R) continue;
    FishCandidate cand{&f, 0, K.width - 1, 0, K.height - 1, fish_body(f, t), Point3::Zero()};
    cand.q = cand.body.M * (o - cand.body.center);
    if (c.z() - rmax > 1e-3) {
      double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
      for (int corner = 0; corner < 8; ++corner) {
        const Point3 p = c + rmax * Point3(corner & 1 ? 1 : -1, corner & 2 ? 1 : -1, corner & 4 ? 1 : -1);
        const Point2 px = project(K, p);
        umin = std::min(umin, px.x());
        umax = std::max(umax, px.x());
        vmin = std::min(vmin, px.y());
        vmax = std::max(vmax, px.y());
      }
      if (umax < 0 || vmax < 0 || umin > K.width - 1 || vmin > K.height - 1) continue;
      cand.u0 = std::max(0, static_cast<int>(std::floor(umin)));
      cand.u1 = std::min(K.width - 1, static_cast<int>(std::ceil(umax)));
      cand.v0 = std::max(0, static_cast<int>(std::floor(vmin)));
      cand.v1 = std::min(K.height - 1, static_cast<int>(std::ceil(vmax)));
    }
    candidates.push_back(cand);
  }

  RenderOutput out{RgbImage(K.width, K.height), DepthImage(K.width, K.height),
                   DepthImage::Mask::Constant(K.height, K.width, false)};
  std::normal_distribution<double> n01(0.0, 1.0);

  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const Point3 dcam = pixel_ray(K, static_cast<double>(u), static_cast<double>(v));
      const Point3 dpen = Rm * dcam;
      const double dnorm = dpen.norm();
      const Point3 view = dpen / dnorm;

      std::optional<double> t_net = intersect_cylinder(o, dpen, R);
      if (t_net) {
        const double zhit = o.z() + *t_net * dpen.z();
        if (zhit < 0 || zhit > world.pen_depth) t_net.reset();
      }

      double best_fish = std::numeric_limits<double>::infinity();
      const FishCandidate* hit_fish = nullptr;
      for (const auto& cand : candidates) {
        if (u < cand.u0 || u > cand.u1 || v < cand.v0 || v > cand.v1) continue;
        if (auto s = unit_sphere_hit(cand.q, cand.body.M * dpen); s && *s < best_fish) {
          best_fish = *s;
          hit_fish = &cand;
        }
      }

      std::array<double, 3> color;
      if (hit_fish && (!t_net || best_fish < *t_net)) {
        out.fish_mask(v, u) = true;
        const Point3 p = o + best_fish * dpen;
        const Eigen::Matrix3d& M = hit_fish->body.M;
        const Point3 normal = M.transpose() * (M * (p - hit_fish->body.center));
        const double shade = luma_shade(normal, view) * std::exp(-world.water_attenuation * best_fish * dnorm);
        for (int k = 0; k < 3; ++k) color[k] = kFish[k] * shade;
      } else if (t_net) {
        out.net_depth.values(v, u) = *t_net;
        out.net_depth.valid(v, u) = true;
        const Point3 p = o + *t_net * dpen;
        const double range = *t_net * dnorm;
        const double theta = std::atan2(p.y(), p.x());
        const Point3 normal(-p.x() / R, -p.y() / R, 0.0);
        const double cos_inc = std::max(std::abs(normal.dot(view)), 0.05);
        const double fp_s = range / (K.fx * cos_inc);
        const double fp_z = range / (K.fy * cos_inc);
        const double cs = pulse_coverage(R * theta, fp_s, L, world.twine_width);
        const double cz = pulse_coverage(p.z(), fp_z, L, world.twine_width);
        const double twine = 1.0 - (1.0 - cs) * (1.0 - cz);
        for (int k = 0; k < 3; ++k) color[k] = kThroughNet[k] * (1.0 - twine) + kTwine[k] * twine;

        for (const auto& rope : ropes) {
          const Eigen::Vector2d q(R * angle_diff(theta, rope.theta0), p.z() - rope.z0);
          const double along = std::clamp(q.dot(rope.dir), 0.0, rope.length);
          const double dist = (q - along * rope.dir).norm();
          const double fp = std::max(fp_s, fp_z);
          const double cover = std::clamp((rope.half_width - dist) / fp + 0.5, 0.0, 1.0);
          if (cover > 0)
            for (int k = 0; k < 3; ++k) color[k] = color[k] * (1.0 - cover) + kRope[k] * cover;
        }
        const double atten = std::exp(-world.water_attenuation * range);
        for (auto& c : color) c *= atten;
      } else {
        color = kOpenWater;
      }

      const double noise = settings.pixel_noise_sigma > 0 ? settings.pixel_noise_sigma * n01(rng) : 0.0;
      std::uint8_t* px = out.image.pixel(u, v);
      for (int k = 0; k < 3; ++k)
        px[k] = static_cast<std::uint8_t>(std::clamp(color[k] + noise, 0.0, 255.0) + 0.5);
    }
  }
  return out;
}

std::optional<double> net_range(const PenWorld& world, const GlobalPose& pose, const Point3& dir_cam) {
  const auto T = pen_from_camera(pose);
  const Point3 d = T.linear() * dir_cam.normalized();
  return intersect_cylinder<double>(T.translation(), d, world.pen_radius);
}

NetRelativePose true_relative_pose(const PenWorld& world, const GlobalPose& pose) {
  require_inside(world, pose);
  const auto T = pen_from_camera(pose);
  const Point3 axis = T.linear().col(2);
  const auto t = intersect_cylinder<double>(T.translation(), axis, world.pen_radius);
  if (!t) throw Error(ErrorCode::PoseOutsidePen, "optical axis does not meet the net");
  const Point3 p = T.translation() + *t * axis;
  const Point3 n_pen(-p.x() / world.pen_radius, -p.y() / world.pen_radius, 0.0);
  const Point3 n = T.linear().transpose() * n_pen;
  return {*t, std::atan2(n.x(), -n.z()), std::atan2(n.y(), -n.z())};
}

void sample_sensors(const PenWorld& world, const FishField& fish, const GlobalPose& pose,
                    const BodyVelocity& true_velocity, const DvlBeamGeometry& dvl,
                    const SensorNoise& noise, std::mt19937_64& rng, SensorFrame& out) {
  noise.validate();
  require_inside(world, pose);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto T = pen_from_camera(pose);
  const Point3 o = T.translation();

  // One acoustic ray: exact net range, a real fish blocking the ray, or the
  // random fish-return outlier.
  auto acoustic = [&](const Point3& dir_cam, double sigma, double& truth, bool& outlier) {
    const Point3 d = T.linear() * dir_cam.normalized();
    const auto t_net = intersect_cylinder<double>(o, d, world.pen_radius);
    truth = t_net.value_or(std::numeric_limits<double>::quiet_NaN());
    const double draw = unit(rng);
    const double gauss = n01(rng);
    if (auto s = fish.intersect(o, d, pose.t); s && (!t_net || *s < *t_net)) {
      outlier = true;
      return *s;
    }
    if (draw < noise.fish_hit_probability) {
      outlier = true;
      std::vector<const Fish*> ahead;
      for (const auto& f : fish.fish) {
        const Point3 rel = f.center(pose.t) - o;
        if (rel.dot(d) > 0 && (!t_net || rel.norm() < *t_net)) ahead.push_back(&f);
      }
      if (!ahead.empty()) {
        const Fish* f = ahead[std::min(ahead.size() - 1, static_cast<std::size_t>(unit(rng) * ahead.size()))];
        const Point3 rel = f->center(pose.t) - o;
        return f->intersect(o, rel.normalized(), pose.t).value_or(rel.norm());
      }
      const double base = t_net ? *t_net : 1.0;
      return base * (0.2 + 0.6 * unit(rng));
    }
    outlier = false;
    return truth + sigma * gauss;
  };

  out.truth = pose;
  out.t = pose.t;
  out.truth_relative = true_relative_pose(world, pose);
  const auto dirs = dvl.directions();
  for (std::size_t i = 0; i < 4; ++i)
    out.dvl_beams[i] = acoustic(dirs[i], noise.dvl_range_sigma, out.true_beams[i], out.beam_outlier[i]);
  out.echo_range = acoustic(Point3(0, 0, 1), noise.echo_sigma, out.true_echo, out.echo_outlier);
  out.pressure_depth = pose.z + noise.pressure_sigma * n01(rng);
  out.imu_yaw = wrap_angle(pose.psi + noise.imu_yaw_drift_rate * pose.t);
  out.dvl_velocity.vx = true_velocity.vx + noise.dvl_velocity_sigma * n01(rng);
  out.dvl_velocity.vy = true_velocity.vy + noise.dvl_velocity_sigma * n01(rng);
  out.dvl_velocity.t = pose.t;
}

GlobalPose VehicleState::pose() const {
  const auto cyl = cart_to_cyl(position);
  return {cyl.r, cyl.theta, z, psi, t};
}

ControllerStep step_controller(const PenWorld& world, const ControllerConfig& cfg,
                               const VehicleState& state, const Setpoint& sp, double dt) {
  if (!(dt > 0)) throw Error(ErrorCode::NonPositiveDt, "dt must be positive");
  if (!(sp.distance > 0 && sp.distance < world.pen_radius))
    throw Error(ErrorCode::UnreachableSetpoint, "net distance setpoint outside (0, pen_radius)");
  if (!(cfg.gain > 0 && cfg.gain * dt < 1 && cfg.depth_gain >= 0 && cfg.depth_gain * dt <= 1))
    throw Error(ErrorCode::InvalidArgument, "controller gains unstable for this dt");
  const auto cyl = cart_to_cyl(state.position);
  if (!(cyl.r < world.pen_radius)) throw Error(ErrorCode::PoseOutsidePen, "vehicle outside the pen");

  const double error = (world.pen_radius - cyl.r) - sp.distance;
  const double r_next = cyl.r + cfg.gain * error * dt;
  const double theta_next = r_next > 0 ? cyl.theta + sp.speed * dt / r_next : cyl.theta;

  ControllerStep step;
  step.next.t = state.t + dt;
  step.next.position = cyl_to_cart(r_next, theta_next);
  step.next.z = state.z + cfg.depth_gain * (sp.depth - state.z) * dt;
  const double wander = cfg.heading_amplitude != 0
                            ? cfg.heading_amplitude *
                                  std::sin(2.0 * std::numbers::pi * step.next.t / cfg.heading_period)
                            : 0.0;
  step.next.psi = wrap_angle(theta_next + wander);

  const Point2 v_pen = (step.next.position - state.position) / dt;
  const double c = std::cos(state.psi);
  const double s = std::sin(state.psi);
  step.velocity = {c * v_pen.x() + s * v_pen.y(), -s * v_pen.x() + c * v_pen.y(), state.t};
  return step;
}

}  // namespace netpen
