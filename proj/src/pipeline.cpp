#include "netpen/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

namespace netpen {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ms_since(Clock::time_point& start) {
  const auto now = Clock::now();
  const double ms = std::chrono::duration<double, std::milli>(now - start).count();
  start = now;
  return ms;
}

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) config_error(where + " must be a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    config_error("bad value for " + where + "." + key);
  }
}

const char* strategy_name(CompletionKind k) {
  switch (k) {
    case CompletionKind::QuadraticSurface: return "quadratic";
    case CompletionKind::InverseDistanceWeighting: return "idw";
    case CompletionKind::ConstantMean: return "constant_mean";
  }
  return "quadratic";
}

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double get_num(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::DatasetError, std::string("report missing field ") + key);
  const auto& v = j.at(key);
  return v.is_null() ? kNaN : v.get<double>();
}

std::vector<double> segment_bounds(const ScenarioConfig& s) {
  std::vector<double> out;
  double t = 0;
  for (const auto& seg : s.segments) out.push_back(t += seg.duration);
  return out;
}

json metrics_json(const Metrics& m) {
  json q = json::object();
  for (const auto& [k, e] : m.quantities) q[k] = {{"rmse", e.rmse}, {"max_abs", e.max_abs}, {"count", e.count}};
  auto seg = [](const std::vector<QuantityError>& v) {
    json a = json::array();
    for (const auto& e : v) a.push_back({{"rmse", e.rmse}, {"max_abs", e.max_abs}, {"count", e.count}});
    return a;
  };
  json commanded = json::array();
  for (double c : m.segment_commanded) commanded.push_back(num(c));
  return {{"frames", m.frames},
          {"degraded_frames", m.degraded_frames},
          {"quantities", q},
          {"segment_distance", seg(m.segment_distance)},
          {"segment_distance_fft", seg(m.segment_distance_fft)},
          {"segment_mean_true_distance", commanded},
          {"radial_within_fraction", m.radial_within_fraction},
          {"radial_excursions", m.radial_excursions},
          {"radial_excursions_off_schedule", m.radial_excursions_off_schedule},
          {"yaw_max_residual_deg", rad2deg(m.yaw_max_residual)},
          {"yaw_drift_rate_deg_per_s", rad2deg(m.yaw_drift_rate)},
          {"dvl_sigma", m.dvl_sigma},
          {"echo_sigma", m.echo_sigma},
          {"dvl_outliers", m.dvl_outliers},
          {"echo_outliers", m.echo_outliers}};
}

}  // namespace

void PipelineConfig::validate() const {
  try {
    fft.validate();
    completion.validate();
    sensor_model.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (depth_pose_stride < 1) config_error("depth_pose_stride must be >= 1");
  if (!(map_resolution > 0)) config_error("map.resolution must be positive");
  if (map_ray_stride < 1) config_error("map.ray_stride must be >= 1");
  if (cloud_stride < 1) config_error("cloud_stride must be >= 1");
  if (smoothing_window < 1 || smoothing_window % 2 == 0) config_error("smoothing_window must be odd and >= 1");
  if (!(prior_plane_tolerance >= 0)) config_error("prior_plane_tolerance must be >= 0");
}

PipelineConfig parse_pipeline_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    config_error(std::string("pipeline YAML: ") + e.what());
  }
  PipelineConfig c;
  if (!root || root.IsNull()) return c;
  check_keys(root, "pipeline",
             {"fft", "completion", "depth_pose_stride", "map", "cloud_stride", "exclude_degraded",
              "write_depth", "smoothing_window", "prior_plane_tolerance"});
  if (const auto f = root["fft"]) {
    check_keys(f, "fft", {"patch_size", "patch_stride", "grid_cell", "min_period_px", "max_period_px",
                          "confidence_threshold", "dc_radius_bins", "prefer_vertical"});
    read(f, "patch_size", c.fft.patch_size, "fft");
    read(f, "patch_stride", c.fft.patch_stride, "fft");
    read(f, "grid_cell", c.fft.grid_cell, "fft");
    read(f, "min_period_px", c.fft.min_period_px, "fft");
    read(f, "max_period_px", c.fft.max_period_px, "fft");
    read(f, "confidence_threshold", c.fft.confidence_threshold, "fft");
    read(f, "dc_radius_bins", c.fft.dc_radius_bins, "fft");
    read(f, "prefer_vertical", c.fft.prefer_vertical, "fft");
  }
  if (const auto d = root["completion"]) {
    check_keys(d, "completion", {"strategy", "idw_power", "idw_neighbors"});
    std::string s = strategy_name(c.completion.kind);
    read(d, "strategy", s, "completion");
    if (s == "quadratic") c.completion.kind = CompletionKind::QuadraticSurface;
    else if (s == "idw") c.completion.kind = CompletionKind::InverseDistanceWeighting;
    else if (s == "constant_mean") c.completion.kind = CompletionKind::ConstantMean;
    else config_error("completion.strategy must be quadratic, idw or constant_mean");
    read(d, "idw_power", c.completion.idw_power, "completion");
    read(d, "idw_neighbors", c.completion.idw_neighbors, "completion");
  }
  if (const auto m = root["map"]) {
    check_keys(m, "map", {"enabled", "resolution", "ray_stride", "hit_logodds", "miss_logodds", "max_ray_range"});
    read(m, "enabled", c.build_map, "map");
    read(m, "resolution", c.map_resolution, "map");
    read(m, "ray_stride", c.map_ray_stride, "map");
    read(m, "hit_logodds", c.sensor_model.hit_logodds, "map");
    read(m, "miss_logodds", c.sensor_model.miss_logodds, "map");
    read(m, "max_ray_range", c.sensor_model.max_ray_range, "map");
  }
  read(root, "depth_pose_stride", c.depth_pose_stride, "pipeline");
  read(root, "cloud_stride", c.cloud_stride, "pipeline");
  read(root, "exclude_degraded", c.exclude_degraded, "pipeline");
  read(root, "write_depth", c.write_depth, "pipeline");
  read(root, "smoothing_window", c.smoothing_window, "pipeline");
  read(root, "prior_plane_tolerance", c.prior_plane_tolerance, "pipeline");
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) config_error("cannot open pipeline config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_pipeline_config(ss.str());
  } catch (const Error& e) {
    config_error(path.string() + ": " + e.what());
  }
}

std::string dump_pipeline_config(const PipelineConfig& c) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "fft" << YAML::Value << YAML::BeginMap
    << YAML::Key << "patch_size" << YAML::Value << c.fft.patch_size
    << YAML::Key << "patch_stride" << YAML::Value << c.fft.patch_stride
    << YAML::Key << "grid_cell" << YAML::Value << shortest(c.fft.grid_cell)
    << YAML::Key << "min_period_px" << YAML::Value << shortest(c.fft.min_period_px)
    << YAML::Key << "max_period_px" << YAML::Value << shortest(c.fft.max_period_px)
    << YAML::Key << "confidence_threshold" << YAML::Value << shortest(c.fft.confidence_threshold)
    << YAML::Key << "dc_radius_bins" << YAML::Value << c.fft.dc_radius_bins
    << YAML::Key << "prefer_vertical" << YAML::Value << c.fft.prefer_vertical << YAML::EndMap;
  e << YAML::Key << "completion" << YAML::Value << YAML::BeginMap
    << YAML::Key << "strategy" << YAML::Value << strategy_name(c.completion.kind)
    << YAML::Key << "idw_power" << YAML::Value << shortest(c.completion.idw_power)
    << YAML::Key << "idw_neighbors" << YAML::Value << c.completion.idw_neighbors << YAML::EndMap;
  e << YAML::Key << "depth_pose_stride" << YAML::Value << c.depth_pose_stride;
  e << YAML::Key << "map" << YAML::Value << YAML::BeginMap
    << YAML::Key << "enabled" << YAML::Value << c.build_map
    << YAML::Key << "resolution" << YAML::Value << shortest(c.map_resolution)
    << YAML::Key << "ray_stride" << YAML::Value << c.map_ray_stride
    << YAML::Key << "hit_logodds" << YAML::Value << shortest(c.sensor_model.hit_logodds)
    << YAML::Key << "miss_logodds" << YAML::Value << shortest(c.sensor_model.miss_logodds)
    << YAML::Key << "max_ray_range" << YAML::Value << shortest(c.sensor_model.max_ray_range) << YAML::EndMap;
  e << YAML::Key << "cloud_stride" << YAML::Value << c.cloud_stride;
  e << YAML::Key << "exclude_degraded" << YAML::Value << c.exclude_degraded;
  e << YAML::Key << "write_depth" << YAML::Value << c.write_depth;
  e << YAML::Key << "smoothing_window" << YAML::Value << c.smoothing_window;
  e << YAML::Key << "prior_plane_tolerance" << YAML::Value << shortest(c.prior_plane_tolerance);
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

Percentiles percentiles(std::vector<double> v) {
  Percentiles p;
  if (v.empty()) return p;
  std::sort(v.begin(), v.end());
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(k, 1, v.size()) - 1];
  };
  return {rank(0.5), rank(0.9), rank(0.99), v.back()};
}

std::vector<FrameEstimate> RunReport::estimates() const {
  std::vector<FrameEstimate> out;
  for (const auto& f : frames) out.push_back(f.estimate);
  return out;
}

std::vector<FrameTruth> RunReport::truths() const {
  std::vector<FrameTruth> out;
  for (const auto& f : frames) out.push_back(f.truth);
  return out;
}

Pipeline::Pipeline(const ScenarioConfig& scenario, PipelineConfig cfg)
    : scenario_(scenario), cfg_(std::move(cfg)), tracker_(scenario.world.pen_radius) {
  cfg_.validate();
  if (cfg_.build_map)
    map_ = OccupancyMap::for_pen(scenario_.world.pen_radius, scenario_.world.pen_depth, cfg_.map_resolution);
}

FrameRecord Pipeline::process(const SensorFrame& frame) {
  const Camera& K = scenario_.camera;
  FrameRecord rec;
  FrameEstimate& est = rec.estimate;
  est.index = frame.index;
  est.t = frame.t;
  est.imu_yaw = frame.imu_yaw;
  est.echo_range = frame.echo_range;
  rec.truth = {frame.index, frame.t, frame.truth_relative.distance, frame.truth_relative.yaw_rel,
               frame.truth_relative.pitch_rel, frame.truth.r, frame.truth.theta, frame.truth.z,
               frame.truth.psi};

  auto clock = Clock::now();
  const auto start = clock;

  const GrayImage gray = to_gray(frame.image);
  auto priors = extract_priors(gray, K, cfg_.fft);
  WeightedPoints pts = priors_to_points(priors, K);
  if (cfg_.prior_plane_tolerance > 0 && priors.size() > 6) {
    const auto keep = plane_inliers(pts.points, pts.weights, cfg_.prior_plane_tolerance);
    if (keep.size() < priors.size()) {
      std::vector<SparseDepthPrior> kept;
      kept.reserve(keep.size());
      for (auto i : keep) kept.push_back(priors[i]);
      priors = std::move(kept);
      pts = priors_to_points(priors, K);
    }
  }
  est.prior_count = static_cast<int>(priors.size());
  rec.timing.priors = ms_since(clock);

  est.distance_fft = est.yaw_fft = est.pitch_fft = kNaN;
  try {
    const auto rel = relpose_from_points(pts.points, pts.weights);
    est.distance_fft = rel.distance;
    est.yaw_fft = rel.yaw_rel;
    est.pitch_fft = rel.pitch_rel;
  } catch (const Error& e) {
    spdlog::debug("frame {}: FFT relpose unavailable: {}", frame.index, e.what());
  }
  rec.timing.relpose = ms_since(clock);

  est.distance = est.yaw_rel = est.pitch_rel = kNaN;
  last_depth_.reset();
  if (!priors.empty()) {
    try {
      last_depth_ = complete_depth(K.width, K.height, priors, K, cfg_.completion);
      const auto rel = relpose_from_depthmap(*last_depth_, K, cfg_.depth_pose_stride);
      est.distance = rel.distance;
      est.yaw_rel = rel.yaw_rel;
      est.pitch_rel = rel.pitch_rel;
    } catch (const Error& e) {
      spdlog::debug("frame {}: depth completion unavailable: {}", frame.index, e.what());
    }
  }
  rec.timing.depth = ms_since(clock);

  const FusionResult fused = tracker_.update(frame.t, frame.dvl_velocity, pts.points, frame.pressure_depth);
  est.degraded = fused.degraded || !std::isfinite(est.distance);
  if (tracker_.current()) {
    est.r = fused.pose.r;
    est.theta = fused.pose.theta;
    est.z = fused.pose.z;
    est.psi = fused.pose.psi;
  } else {
    est.r = est.theta = est.z = est.psi = kNaN;
  }
  est.r_pred = fused.r_pred;
  est.r_fit = fused.r_fit;
  est.fit_residual = fused.fit ? fused.fit->rms_residual : kNaN;
  rec.timing.fusion = ms_since(clock);

  const bool usable = tracker_.current() && !(cfg_.exclude_degraded && est.degraded);
  if (map_ && usable && last_depth_)
    map_->insert_depth_image(fused.pose, *last_depth_, K, cfg_.sensor_model, cfg_.map_ray_stride);
  rec.timing.map = ms_since(clock);

  if (usable)
    cloud_.append(project_to_cylinder(frame.image, fused.pose, K, scenario_.world.pen_radius,
                                      cfg_.cloud_stride, static_cast<std::uint32_t>(frame.index)));
  rec.timing.cloud = ms_since(clock);
  rec.timing.total = std::chrono::duration<double, std::milli>(clock - start).count();

  est.dvl_distance = est.dvl_yaw = est.dvl_pitch = kNaN;
  try {
    const auto dvl = relpose_from_dvl_beams(frame.dvl_beams, scenario_.dvl);
    est.dvl_distance = dvl.distance;
    est.dvl_yaw = dvl.yaw_rel;
    est.dvl_pitch = dvl.pitch_rel;
  } catch (const Error& e) {
    spdlog::debug("frame {}: DVL relpose unavailable: {}", frame.index, e.what());
  }

  if (est.degraded) spdlog::info("frame {} degraded ({} priors)", frame.index, priors.size());
  records_.push_back(rec);
  return rec;
}

RunReport Pipeline::report() const {
  RunReport r;
  r.frames = records_;
  r.setpoint_changes = scenario_.setpoint_changes();
  r.segment_bounds = segment_bounds(scenario_);
  r.smoothing_window = cfg_.smoothing_window;
  const auto est = r.estimates();
  const auto tru = r.truths();
  EvalOptions opt;
  opt.setpoint_changes = r.setpoint_changes;
  opt.segment_bounds = r.segment_bounds;
  r.metrics = evaluate(est, tru, opt);

  std::map<std::string, std::vector<double>> stages;
  for (const auto& f : records_) {
    stages["priors"].push_back(f.timing.priors);
    stages["relpose"].push_back(f.timing.relpose);
    stages["depth"].push_back(f.timing.depth);
    stages["fusion"].push_back(f.timing.fusion);
    stages["map"].push_back(f.timing.map);
    stages["cloud"].push_back(f.timing.cloud);
    stages["total"].push_back(f.timing.total);
  }
  for (auto& [k, v] : stages) r.timing[k] = percentiles(std::move(v));
  return r;
}

void write_report_json(const std::filesystem::path& path, const RunReport& report, bool include_timing) {
  json frames = json::array();
  json timing_frames = json::array();
  for (const auto& f : report.frames) {
    const auto& e = f.estimate;
    const auto& g = f.truth;
    frames.push_back({{"index", e.index},
                      {"t", e.t},
                      {"prior_count", e.prior_count},
                      {"degraded", e.degraded},
                      {"estimate",
                       {{"distance", num(e.distance)}, {"yaw_rel", num(e.yaw_rel)}, {"pitch_rel", num(e.pitch_rel)},
                        {"distance_fft", num(e.distance_fft)}, {"yaw_fft", num(e.yaw_fft)},
                        {"pitch_fft", num(e.pitch_fft)}, {"dvl_distance", num(e.dvl_distance)},
                        {"dvl_yaw", num(e.dvl_yaw)}, {"dvl_pitch", num(e.dvl_pitch)},
                        {"echo_range", num(e.echo_range)}, {"r", num(e.r)}, {"theta", num(e.theta)},
                        {"z", num(e.z)}, {"psi", num(e.psi)}, {"r_pred", num(e.r_pred)},
                        {"r_fit", num(e.r_fit)}, {"fit_residual", num(e.fit_residual)},
                        {"imu_yaw", num(e.imu_yaw)}}},
                      {"truth",
                       {{"distance", g.distance}, {"yaw_rel", g.yaw_rel}, {"pitch_rel", g.pitch_rel},
                        {"r", g.r}, {"theta", g.theta}, {"z", g.z}, {"psi", g.psi}}}});
    timing_frames.push_back({{"priors", f.timing.priors}, {"relpose", f.timing.relpose},
                             {"depth", f.timing.depth}, {"fusion", f.timing.fusion},
                             {"map", f.timing.map}, {"cloud", f.timing.cloud}, {"total", f.timing.total}});
  }
  json j = {{"frames", frames},
            {"setpoint_changes", report.setpoint_changes},
            {"segment_bounds", report.segment_bounds},
            {"smoothing_window", report.smoothing_window},
            {"metrics", metrics_json(report.metrics)}};
  if (include_timing) {
    json pct = json::object();
    for (const auto& [k, p] : report.timing) pct[k] = {{"p50", p.p50}, {"p90", p.p90}, {"p99", p.p99}, {"max", p.max}};
    j["timing"] = {{"unit", "ms"}, {"percentiles", pct}, {"frames", timing_frames}};
  }
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << j.dump(1) << '\n';
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

RunReport read_report_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::DatasetError, "cannot open report " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DatasetError, path.string() + ": " + e.what());
  }
  RunReport r;
  try {
    r.setpoint_changes = j.at("setpoint_changes").get<std::vector<double>>();
    r.segment_bounds = j.at("segment_bounds").get<std::vector<double>>();
    r.smoothing_window = j.at("smoothing_window").get<int>();
    for (const auto& f : j.at("frames")) {
      FrameRecord rec;
      auto& e = rec.estimate;
      const auto& je = f.at("estimate");
      const auto& jg = f.at("truth");
      e.index = f.at("index").get<int>();
      e.t = f.at("t").get<double>();
      e.prior_count = f.at("prior_count").get<int>();
      e.degraded = f.at("degraded").get<bool>();
      e.distance = get_num(je, "distance");
      e.yaw_rel = get_num(je, "yaw_rel");
      e.pitch_rel = get_num(je, "pitch_rel");
      e.distance_fft = get_num(je, "distance_fft");
      e.yaw_fft = get_num(je, "yaw_fft");
      e.pitch_fft = get_num(je, "pitch_fft");
      e.dvl_distance = get_num(je, "dvl_distance");
      e.dvl_yaw = get_num(je, "dvl_yaw");
      e.dvl_pitch = get_num(je, "dvl_pitch");
      e.echo_range = get_num(je, "echo_range");
      e.r = get_num(je, "r");
      e.theta = get_num(je, "theta");
      e.z = get_num(je, "z");
      e.psi = get_num(je, "psi");
      e.r_pred = get_num(je, "r_pred");
      e.r_fit = get_num(je, "r_fit");
      e.fit_residual = get_num(je, "fit_residual");
      e.imu_yaw = get_num(je, "imu_yaw");
      rec.truth = {e.index, e.t, get_num(jg, "distance"), get_num(jg, "yaw_rel"), get_num(jg, "pitch_rel"),
                   get_num(jg, "r"), get_num(jg, "theta"), get_num(jg, "z"), get_num(jg, "psi")};
      r.frames.push_back(rec);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DatasetError, path.string() + ": " + e.what());
  }
  EvalOptions opt;
  opt.setpoint_changes = r.setpoint_changes;
  opt.segment_bounds = r.segment_bounds;
  r.metrics = evaluate(r.estimates(), r.truths(), opt);
  return r;
}

RunReport run_pipeline(const std::filesystem::path& dataset, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const DatasetReader reader(dataset);
  Pipeline pipeline(reader.scenario(), cfg);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  if (cfg.write_depth) fs::create_directories(out_dir / "depth");

  std::ofstream csv(out_dir / "poses.csv");
  std::ofstream jsonl(out_dir / "poses.jsonl");
  if (!csv || !jsonl) throw Error(ErrorCode::IoError, "cannot write poses in " + out_dir.string());
  csv.precision(12);
  csv << "t,r,theta,z,psi,fit_residual,degraded\n";

  for (int i = 0; i < reader.size(); ++i) {
    const SensorFrame frame = reader.frame(i);
    const FrameRecord rec = pipeline.process(frame);
    const auto& e = rec.estimate;
    csv << e.t << ',' << e.r << ',' << e.theta << ',' << e.z << ',' << e.psi << ',' << e.fit_residual
        << ',' << (e.degraded ? 1 : 0) << '\n';
    jsonl << json{{"t", e.t}, {"r", num(e.r)}, {"theta", num(e.theta)}, {"z", num(e.z)},
                  {"psi", num(e.psi)}, {"fit_residual", num(e.fit_residual)}, {"degraded", e.degraded}}
                 .dump()
          << '\n';
    if (cfg.write_depth && pipeline.last_depth()) {
      char name[32];
      std::snprintf(name, sizeof name, "%06d.npdf", frame.index);
      write_depth_raster(out_dir / "depth" / name, *pipeline.last_depth());
    }
    spdlog::debug("frame {} t={:.2f} priors={} total={:.1f} ms", frame.index, frame.t, e.prior_count,
                  rec.timing.total);
  }
  if (!csv || !jsonl) throw Error(ErrorCode::IoError, "write failed for poses in " + out_dir.string());

  write_ply(out_dir / "cloud.ply", pipeline.cloud());
  if (pipeline.map()) pipeline.map()->save(out_dir / "map.npmap");
  save_scenario(out_dir / "scenario.yaml", reader.scenario());
  const RunReport report = pipeline.report();
  write_report_json(out_dir / "report.json", report);
  return report;
}

}  // namespace netpen
