// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "netpen/evaluate.hpp"
#include "netpen/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace netpen;

namespace {

// Tolerances.
constexpr double kScaleTol = 0.05;
constexpr double kPatchMs = 5.0;
constexpr double kSegmentRmseFrac = 0.05;
constexpr double kYawRmseDeg = 2.0;
constexpr double kRunSeconds = 60.0;
constexpr double kOutliersPer100 = 1.0;
constexpr double kFishRmseRatio = 2.0;
constexpr double kRadialFraction = 0.90;
constexpr double kYawDriftDeg = 5.0;
constexpr double kImuDriftRate = 0.002;
constexpr double kImuDriftTol = 0.20;
constexpr double kPlaneTol = 1e-9;
constexpr double kSmoothTol = 1e-12;
constexpr double kNearNetM = 0.1;
constexpr double kNearNetFraction = 0.95;
constexpr double kRopeGapM = 0.02;
constexpr double kLatencyMs = 100.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

struct RopeView {
  int index = 0;
  std::vector<Point3> points;
};

struct Run {
  RunReport report;
  double wall = 0;
  std::optional<OccupancyMap> map;
  std::vector<RopeView> rope_views;
};

Run run_closed_loop(const ScenarioConfig& sc, const PipelineConfig& cfg, bool collect_ropes = false) {
  Run run;
  double side = 0;
  const auto t0 = Clock::now();
  Simulator sim(sc);
  Pipeline pipe(sim.config(), cfg);
  while (!sim.done()) {
    const SensorFrame frame = sim.next();
    const FrameRecord rec = pipe.process(frame);
    if (!collect_ropes || rec.estimate.degraded) continue;
    const auto side0 = Clock::now();
    const auto& e = rec.estimate;
    const GlobalPose pose{e.r, e.theta, e.z, e.psi, e.t};
    auto rope = test::rope_colored(project_to_cylinder(frame.image, pose, sc.camera, sc.world.pen_radius, 4));
    if (rope.size() >= 200) run.rope_views.push_back({e.index, std::move(rope)});
    side += seconds_since(side0);
  }
  // rope collection is evaluation work, not part of the run
  run.wall = seconds_since(t0) - side;
  run.report = pipe.report();
  if (pipe.map()) run.map = *pipe.map();
  return run;
}

void scale_law() {
  PenWorld world;
  const Camera K = test::default_camera();
  const RenderSettings rs;
  std::map<double, PatchEstimate> est;
  double worst = 0;
  bool all = true;
  GrayImage sample_patch;
  for (double d : {0.5, 1.0, 1.5, 2.0, 2.5}) {
    std::mt19937_64 rng(11);
    const auto out = render_frame(world, {}, 0, test::facing_net(world, d), K, rs, rng);
    const GrayImage patch = to_gray(out.image).block(176, 256, 128, 128);
    const auto e = estimate_patch_distance(patch, K, {});
    if (!e) {
      all = false;
      continue;
    }
    est[d] = *e;
    worst = std::max(worst, std::abs(e->depth / d - 1));
    if (d == 1.0) sample_patch = patch;
  }
  double worst_ratio = 0;
  for (double d : {0.5, 1.0}) {
    if (!est.count(d) || !est.count(2 * d)) {
      all = false;
      continue;
    }
    worst_ratio = std::max(worst_ratio, std::abs(est[2 * d].period_px / est[d].period_px / 0.5 - 1));
  }
  std::vector<double> ms;
  if (sample_patch.size() > 0) {
    for (int i = 0; i < 200; ++i) {
      const auto t0 = Clock::now();
      (void)estimate_patch_distance(sample_patch, K, {});
      ms.push_back(1e3 * seconds_since(t0));
    }
  }
  const double patch_ms = ms.empty() ? INFINITY : median(ms);
  verdict(1, "FFT scale law", all && worst < kScaleTol && worst_ratio < kScaleTol && patch_ms < kPatchMs,
          fmt("worst depth error %.2f%% (< %.0f%%), worst period-halving error %.2f%% (< %.0f%%), "
              "median patch time %.2f ms (< %.0f ms)",
              100 * worst, 100 * kScaleTol, 100 * worst_ratio, 100 * kScaleTol, patch_ms, kPatchMs));
}

void scenario_reproduction(const ScenarioConfig& sc, const Run& run) {
  const Metrics& m = run.report.metrics;
  bool pass = m.segment_distance.size() == sc.segments.size() && m.frames == sc.frame_count();
  std::string seg;
  for (std::size_t i = 0; i < m.segment_distance.size() && i < sc.segments.size(); ++i) {
    const double cmd = sc.segments[i].distance;
    const double dense = m.segment_distance[i].rmse, fft = m.segment_distance_fft[i].rmse;
    pass = pass && dense < kSegmentRmseFrac * cmd && fft < kSegmentRmseFrac * cmd;
    seg += fmt("%.1f m: %.4f/%.4f m; ", cmd, dense, fft);
  }
  const double yaw_deg = rad2deg(m.quantities.at("yaw_rel").rmse);
  pass = pass && yaw_deg < kYawRmseDeg && run.wall < kRunSeconds;
  verdict(2, "scenario reproduction", pass,
          fmt("segment distance RMSE dense/fft %s(< %.0f%% of command), yaw_rel RMSE %.3f deg (< %.0f), "
              "%d frames in %.1f s (< %.0f s)",
              seg.c_str(), 100 * kSegmentRmseFrac, yaw_deg, kYawRmseDeg, m.frames, run.wall, kRunSeconds));
}

void acoustic_robustness(const Run& clean, const Run& fishy) {
  const auto est = fishy.report.estimates();
  const auto tru = fishy.report.truths();
  EvalOptions opt;
  opt.acoustic_sigma = clean.report.metrics.dvl_sigma;
  const int dvl = evaluate(est, tru, opt).dvl_outliers;
  opt.acoustic_sigma = clean.report.metrics.echo_sigma;
  const int echo = evaluate(est, tru, opt).echo_outliers;
  const double per100 = 100.0 / static_cast<double>(est.size());
  const auto& qc = clean.report.metrics.quantities;
  const auto& qf = fishy.report.metrics.quantities;
  const double ratio_dense = qf.at("distance").rmse / qc.at("distance").rmse;
  const double ratio_fft = qf.at("distance_fft").rmse / qc.at("distance_fft").rmse;
  const bool pass = dvl * per100 >= kOutliersPer100 && echo * per100 >= kOutliersPer100 &&
                    ratio_dense < kFishRmseRatio && ratio_fft < kFishRmseRatio;
  verdict(3, "acoustic vs vision robustness", pass,
          fmt("outliers per 100 frames: DVL %.1f, echo %.1f (>= %.0f, 3 sigma with sigma %.4f/%.4f m from the "
              "fish-free run); vision RMSE ratio dense %.2f, fft %.2f (< %.0f)",
              dvl * per100, echo * per100, kOutliersPer100, clean.report.metrics.dvl_sigma,
              clean.report.metrics.echo_sigma, ratio_dense, ratio_fft, kFishRmseRatio));
}

void flattening(const ScenarioConfig& base) {
  ScenarioConfig sc = base;
  sc.segments = {{1.0, 5.0, 0.2, 4.0}, {1.8, 5.0, 0.2, 4.0}};
  PipelineConfig cfg;
  cfg.build_map = false;
  cfg.completion.kind = CompletionKind::ConstantMean;
  const Run run = run_closed_loop(sc, cfg);
  int exact = 0;
  double worst = 0;
  for (const auto& f : run.report.frames) {
    exact += f.estimate.yaw_rel == 0.0 && f.estimate.pitch_rel == 0.0;
    worst = std::max({worst, std::abs(f.estimate.yaw_rel), std::abs(f.estimate.pitch_rel)});
  }
  const int n = static_cast<int>(run.report.frames.size());
  verdict(4, "flattening", n == sc.frame_count() && exact == n,
          fmt("%d of %d frames with yaw_rel = pitch_rel = 0 exactly (largest |angle| %.3g)", exact, n, worst));
}

void global_trajectory(const ScenarioConfig& base, const Run& clean) {
  const Metrics& m = clean.report.metrics;
  // where the largest radial disagreement sits relative to the schedule
  double peak = 0, peak_t = 0;
  for (const auto& f : clean.report.frames) {
    const double d = std::abs(f.estimate.r_pred - f.estimate.r_fit);
    if (std::isfinite(d) && d > peak) {
      peak = d;
      peak_t = f.estimate.t;
    }
  }
  double gap_to_change = INFINITY;
  for (double c : clean.report.setpoint_changes) gap_to_change = std::min(gap_to_change, std::abs(peak_t - c));

  ScenarioConfig sc = base;
  sc.noise.imu_yaw_drift_rate = kImuDriftRate;
  sc.segments = {{1.0, 10.0, 0.2, 4.0}, {2.1, 10.0, 0.2, 4.0}, {1.5, 10.0, 0.2, 4.0}};
  PipelineConfig cfg;
  cfg.build_map = false;
  const Run drift = run_closed_loop(sc, cfg);
  const double recovered = drift.report.metrics.yaw_drift_rate;
  const double drift_err = std::abs(recovered / kImuDriftRate - 1);
  const double yaw_deg = rad2deg(m.yaw_max_residual);

  const bool pass = m.radial_within_fraction >= kRadialFraction && m.radial_excursions_off_schedule == 0 &&
                    yaw_deg < kYawDriftDeg && drift_err < kImuDriftTol;
  verdict(5, "global trajectory", pass,
          fmt("|r_pred - r_fit| < 0.1 m on %.1f%% of frames (>= %.0f%%), %d excursions, %d away from setpoint "
              "changes (largest %.4f m at t = %.1f s, %.1f s from a change); yaw residual %.3f deg (< %.0f); "
              "IMU drift %.5f rad/s recovered as %.5f (error %.1f%%, < %.0f%%)",
              100 * m.radial_within_fraction, 100 * kRadialFraction, m.radial_excursions,
              m.radial_excursions_off_schedule, peak, peak_t, gap_to_change, yaw_deg, kYawDriftDeg, kImuDriftRate,
              recovered, 100 * drift_err, 100 * kImuDriftTol));
}

void fit_oracles() {
  constexpr double R = 25.0;
  std::mt19937_64 rng(61);

  // circle: 10 points on a 10 degree arc, 1 cm noise
  const Point2 truth(0, -24);
  std::vector<Point2> fits, oracles;
  bool converged = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point2> pts;
    for (int i = 0; i < 10; ++i) {
      const double phi = deg2rad(-5.0 + 10.0 * i / 9);
      pts.push_back(truth + R * Point2(std::sin(phi), std::cos(phi)) +
                    Point2(test::gaussian(rng, 0.01), test::gaussian(rng, 0.01)));
    }
    const CircleFit fit = fit_circle_fixed_radius(pts, R, truth + Point2(0.05, 0.05));
    converged = converged && fit.converged;
    fits.push_back(fit.center);
    oracles.push_back(oracle::circle_grid_search(pts, R, truth - Point2(0.6, 0.04), truth + Point2(0.6, 0.04)));
  }
  Point2 sd = Point2::Zero();
  for (const auto& o : oracles) sd += (o - truth).cwiseAbs2();
  sd = (sd / 100.0).cwiseSqrt();
  int circle_ok = 0;
  for (std::size_t i = 0; i < fits.size(); ++i)
    circle_ok += std::abs(fits[i].x() - oracles[i].x()) <= 3 * sd.x() &&
                 std::abs(fits[i].y() - oracles[i].y()) <= 3 * sd.y();

  // plane: noise-free random planes with random weights
  double plane_err = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto pts = test::plane_points(test::random_plane(rng), 50, rng);
    std::vector<double> w(pts.size());
    for (auto& x : w) x = test::uniform(rng, 0.1, 2.0);
    const PlaneFit fit = fit_plane(pts, w);
    const oracle::Plane ref = oracle::tls_plane(pts, w);
    const double s = fit.normal.dot(ref.normal) < 0 ? -1.0 : 1.0;
    plane_err = std::max({plane_err, (s * fit.normal - ref.normal).cwiseAbs().maxCoeff(),
                          std::abs(s * fit.offset - ref.offset)});
  }

  // smoothing: random series and odd windows
  double smooth_err = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 300);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = test::uniform(rng, -10, 10);
    int w = 1 + 2 * static_cast<int>(rng() % 15);
    if (w > n) w = n % 2 ? n : n - 1;
    const auto got = smooth(x, w);
    const auto want = oracle::naive_smooth(x, w);
    for (std::size_t i = 0; i < x.size(); ++i) smooth_err = std::max(smooth_err, std::abs(got[i] - want[i]));
  }

  const bool pass = converged && circle_ok == 100 && plane_err <= kPlaneTol && smooth_err <= kSmoothTol;
  verdict(6, "fit oracles", pass,
          fmt("circle within 3 sigma of grid search on %d/100 trials (sigma %.2g/%.2g m); plane max deviation "
              "%.2g (<= %.0e); smoothing max deviation %.2g (<= %.0e)",
              circle_ok, sd.x(), sd.y(), plane_err, kPlaneTol, smooth_err, kSmoothTol));
}

void mapping(const ScenarioConfig& sc, const Run& clean) {
  if (!clean.map) {
    verdict(7, "mapping", false, "no map was built");
    return;
  }
  const OccupancyMap& map = *clean.map;
  const double R = sc.world.pen_radius;

  const auto occupied = map.occupied_leaf_centers();
  std::size_t near = 0;
  for (const auto& c : occupied) near += std::abs(std::hypot(c.x(), c.y()) - R) <= kNearNetM;
  const double near_frac = occupied.empty() ? 0 : static_cast<double>(near) / static_cast<double>(occupied.size());

  std::vector<VoxelKey> stored;
  map.for_each_leaf([&](const VoxelKey& k, const LeafData&) { stored.push_back(k); });
  std::mt19937_64 rng(71);
  const Point3 lo = map.min_corner(), hi = map.max_corner();
  const auto random_point = [&] {
    return Point3(test::uniform(rng, lo.x(), hi.x()), test::uniform(rng, lo.y(), hi.y()),
                  test::uniform(rng, lo.z(), hi.z()));
  };
  int block_ok = 0;
  for (int q = 0; q < 1000; ++q) {
    const VoxelKey key = q % 2 && !stored.empty() ? stored[rng() % stored.size()] : map.key_of(random_point());
    const int level = 1 + static_cast<int>(rng() % static_cast<unsigned>(map.tree_depth()));
    block_ok += map.query(map.center_of(key), level) == oracle::block_max(map, key, level);
  }

  // consecutive rope views one second (0.2 m of travel) apart
  double worst_gap = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < clean.rope_views.size(); ++i)
    for (std::size_t j = i + 1; j < clean.rope_views.size(); ++j) {
      if (clean.rope_views[j].index != clean.rope_views[i].index + 10) continue;
      const auto& a = clean.rope_views[i].points;
      const auto& b = clean.rope_views[j].points;
      const auto la = test::fit_unrolled_line(a, R);
      const auto lb = test::fit_unrolled_line(b, R);
      double z = 0;
      for (const auto& p : a) z += p.z();
      for (const auto& p : b) z += p.z();
      z /= static_cast<double>(a.size() + b.size());
      worst_gap = std::max(worst_gap, la.gap(lb, z));
      ++pairs;
    }

  const auto path = test::scratch_dir("acceptance_map") / "map.npmap";
  map.save(path);
  const OccupancyMap back = OccupancyMap::load(path);
  std::size_t same = 0, asked = 0;
  for (const auto& k : stored)
    for (int level = 0; level <= map.tree_depth(); level += 3) {
      ++asked;
      same += back.query(map.center_of(k), level) == map.query(map.center_of(k), level);
    }
  for (int q = 0; q < 1000; ++q) {
    const Point3 p = random_point();
    const int level = static_cast<int>(rng() % static_cast<unsigned>(map.tree_depth() + 1));
    ++asked;
    same += back.query(p, level) == map.query(p, level);
  }

  const bool pass = near_frac >= kNearNetFraction && block_ok == 1000 && pairs > 0 && worst_gap < kRopeGapM &&
                    same == asked && back.leaf_count() == map.leaf_count();
  verdict(7, "mapping", pass,
          fmt("%.1f%% of %zu occupied leaves within %.2f m of the net (>= %.0f%%); %d/1000 block maxima match "
              "the leaf scan; rope stacking gap %.4f m over %d frame pairs (< %.2f m); %zu/%zu queries identical "
              "after save/load",
              100 * near_frac, occupied.size(), kNearNetM, 100 * kNearNetFraction, block_ok, worst_gap, pairs,
              kRopeGapM, same, asked));
}

void latency(const Run& clean) {
  const auto& t = clean.report.timing.at("total");
  verdict(8, "real-time latency", t.p50 < kLatencyMs,
          fmt("median per-frame latency %.1f ms (< %.0f ms), p90 %.1f ms, max %.1f ms, map insertion median %.1f ms",
              t.p50, kLatencyMs, t.p90, t.max, clean.report.timing.at("map").p50));
}

}  // namespace

int main() {
  const ScenarioConfig base = ScenarioConfig::standard();

  scale_law();

  const Run clean = run_closed_loop(base, {}, true);
  scenario_reproduction(base, clean);

  ScenarioConfig fish = base;
  fish.fish.count = 300;
  fish.noise.fish_hit_probability = 0.2;
  PipelineConfig no_map;
  no_map.build_map = false;
  const Run fishy = run_closed_loop(fish, no_map);
  acoustic_robustness(clean, fishy);

  flattening(base);
  global_trajectory(base, clean);
  fit_oracles();
  mapping(base, clean);
  latency(clean);

  std::printf("%d of 8 criteria failed\n", failures);
  return failures ? 1 : 0;
}
