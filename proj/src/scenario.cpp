#include "netpen/scenario.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "netpen/image_io.hpp"

namespace netpen {

namespace {

using nlohmann::json;

std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
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

class Emit {
public:
  Emit() { e_ << YAML::BeginMap; }

  Emit& kv(const char* key, double v) {
    e_ << YAML::Key << key << YAML::Value << shortest(v);
    return *this;
  }
  Emit& kv(const char* key, int v) {
    e_ << YAML::Key << key << YAML::Value << v;
    return *this;
  }
  Emit& kv(const char* key, std::uint64_t v) {
    e_ << YAML::Key << key << YAML::Value << v;
    return *this;
  }
  Emit& begin_map(const char* key) {
    e_ << YAML::Key << key << YAML::Value << YAML::BeginMap;
    return *this;
  }
  Emit& begin_seq(const char* key) {
    e_ << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    return *this;
  }
  Emit& begin_item() {
    e_ << YAML::Flow << YAML::BeginMap;
    return *this;
  }
  Emit& end_map() {
    e_ << YAML::EndMap;
    return *this;
  }
  Emit& end_seq() {
    e_ << YAML::EndSeq;
    return *this;
  }
  std::string str() {
    e_ << YAML::EndMap;
    return std::string(e_.c_str()) + "\n";
  }

private:
  YAML::Emitter e_;
};

[[noreturn]] void dataset_error(const std::string& msg) { throw Error(ErrorCode::DatasetError, msg); }

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) dataset_error(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    dataset_error(where + ": bad field '" + key + "'");
  }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) dataset_error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception&) {
      dataset_error(path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
    }
  }
  return out;
}

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frames/%06d.png", index);
  return buf;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(dt > 0)) config_error("dt must be positive");
  try {
    world.validate();
    camera.validate();
    noise.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (!(render.pixel_noise_sigma >= 0)) config_error("render.pixel_noise_sigma must be >= 0");
  if (!(dvl.tilt > 0 && dvl.tilt < std::numbers::pi / 2)) config_error("dvl tilt must lie in (0, 90) deg");
  if (!(controller.gain > 0 && controller.gain * dt < 1)) config_error("controller.gain * dt must lie in (0, 1)");
  if (!(controller.depth_gain >= 0 && controller.depth_gain * dt <= 1))
    config_error("controller.depth_gain * dt must lie in [0, 1]");
  if (controller.heading_amplitude != 0 && !(controller.heading_period > 0))
    config_error("controller.heading_period must be positive");
  if (segments.empty()) config_error("trajectory needs at least one segment");
  for (const auto& s : segments) {
    if (!(s.duration > 0)) config_error("segment duration must be positive");
    if (!(s.distance > 0 && s.distance < world.pen_radius - 0.5))
      config_error("segment distance must lie in (0, pen_radius - 0.5)");
    if (!(s.depth >= 0 && s.depth <= world.pen_depth)) config_error("segment depth outside the pen");
  }
  if (fish.count > 0) {
    try {
      FishField::random(world, fish, 0);
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
  if (frame_count() < 1) config_error("scenario shorter than one frame");
}

double ScenarioConfig::duration() const {
  double d = 0;
  for (const auto& s : segments) d += s.duration;
  return d;
}

int ScenarioConfig::frame_count() const { return static_cast<int>(std::lround(duration() / dt)); }

std::vector<double> ScenarioConfig::setpoint_changes() const {
  std::vector<double> out;
  double t = 0;
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    t += segments[i].duration;
    out.push_back(t);
  }
  return out;
}

Setpoint ScenarioConfig::setpoint_at(double t) const {
  double end = 0;
  for (const auto& s : segments) {
    end += s.duration;
    if (t < end - 1e-9) return {s.distance, s.speed, s.depth};
  }
  const auto& s = segments.back();
  return {s.distance, s.speed, s.depth};
}

ScenarioConfig ScenarioConfig::standard() {
  ScenarioConfig c;
  const double pi = std::numbers::pi;
  for (int k = 0; k < 16; ++k) {
    const double th = wrap_angle(pi / 16 + k * pi / 8);
    c.world.ropes.push_back({th, 0.0, th, c.world.pen_depth, 0.03});
  }
  const double span = c.world.pen_depth / c.world.pen_radius;  // 45 degrees unrolled
  c.world.ropes.push_back({-0.05, 0.0, -0.05 + span, c.world.pen_depth, 0.03});
  c.world.ropes.push_back({0.45, 0.0, 0.45 - span, c.world.pen_depth, 0.03});
  c.segments = {{1.0, 20.0, 0.2, 4.0}, {2.1, 20.0, 0.2, 4.0}, {1.5, 20.0, 0.2, 4.0}};
  return c;
}

ScenarioConfig parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    config_error(std::string("scenario YAML: ") + e.what());
  }
  if (!root || !root.IsMap()) config_error("scenario must be a YAML mapping");
  check_keys(root, "scenario",
             {"seed", "dt", "initial_theta", "world", "camera", "render", "dvl", "noise", "fish",
              "controller", "trajectory"});

  ScenarioConfig c;
  read(root, "seed", c.seed, "scenario");
  read(root, "dt", c.dt, "scenario");
  read(root, "initial_theta", c.initial_theta, "scenario");

  if (const auto w = root["world"]) {
    check_keys(w, "world", {"pen_radius", "pen_depth", "grid_cell", "twine_width", "water_attenuation", "ropes"});
    read(w, "pen_radius", c.world.pen_radius, "world");
    read(w, "pen_depth", c.world.pen_depth, "world");
    read(w, "grid_cell", c.world.grid_cell, "world");
    read(w, "twine_width", c.world.twine_width, "world");
    read(w, "water_attenuation", c.world.water_attenuation, "world");
    if (const auto ropes = w["ropes"]) {
      if (!ropes.IsSequence()) config_error("world.ropes must be a sequence");
      for (const auto& r : ropes) {
        check_keys(r, "world.ropes[]", {"theta0", "z0", "theta1", "z1", "width"});
        Rope rope;
        read(r, "theta0", rope.theta0, "rope");
        read(r, "z0", rope.z0, "rope");
        read(r, "theta1", rope.theta1, "rope");
        read(r, "z1", rope.z1, "rope");
        read(r, "width", rope.width, "rope");
        c.world.ropes.push_back(rope);
      }
    }
  }
  if (const auto k = root["camera"]) {
    check_keys(k, "camera", {"fx", "fy", "cx", "cy", "width", "height"});
    read(k, "fx", c.camera.fx, "camera");
    read(k, "fy", c.camera.fy, "camera");
    read(k, "cx", c.camera.cx, "camera");
    read(k, "cy", c.camera.cy, "camera");
    read(k, "width", c.camera.width, "camera");
    read(k, "height", c.camera.height, "camera");
  }
  if (const auto r = root["render"]) {
    check_keys(r, "render", {"pixel_noise_sigma"});
    read(r, "pixel_noise_sigma", c.render.pixel_noise_sigma, "render");
  }
  if (const auto d = root["dvl"]) {
    check_keys(d, "dvl", {"tilt_deg"});
    double tilt = rad2deg(c.dvl.tilt);
    read(d, "tilt_deg", tilt, "dvl");
    c.dvl.tilt = deg2rad(tilt);
  }
  if (const auto n = root["noise"]) {
    check_keys(n, "noise", {"dvl_velocity_sigma", "dvl_range_sigma", "echo_sigma", "pressure_sigma",
                            "imu_yaw_drift_rate", "fish_hit_probability"});
    read(n, "dvl_velocity_sigma", c.noise.dvl_velocity_sigma, "noise");
    read(n, "dvl_range_sigma", c.noise.dvl_range_sigma, "noise");
    read(n, "echo_sigma", c.noise.echo_sigma, "noise");
    read(n, "pressure_sigma", c.noise.pressure_sigma, "noise");
    read(n, "imu_yaw_drift_rate", c.noise.imu_yaw_drift_rate, "noise");
    read(n, "fish_hit_probability", c.noise.fish_hit_probability, "noise");
  }
  if (const auto f = root["fish"]) {
    check_keys(f, "fish", {"count", "min_wall_gap", "max_wall_gap", "min_depth", "max_depth", "speed"});
    read(f, "count", c.fish.count, "fish");
    read(f, "min_wall_gap", c.fish.min_wall_gap, "fish");
    read(f, "max_wall_gap", c.fish.max_wall_gap, "fish");
    read(f, "min_depth", c.fish.min_depth, "fish");
    read(f, "max_depth", c.fish.max_depth, "fish");
    read(f, "speed", c.fish.speed, "fish");
  }
  if (const auto k = root["controller"]) {
    check_keys(k, "controller", {"gain", "depth_gain", "heading_amplitude", "heading_period"});
    read(k, "gain", c.controller.gain, "controller");
    read(k, "depth_gain", c.controller.depth_gain, "controller");
    read(k, "heading_amplitude", c.controller.heading_amplitude, "controller");
    read(k, "heading_period", c.controller.heading_period, "controller");
  }
  if (const auto tr = root["trajectory"]) {
    if (!tr.IsSequence()) config_error("trajectory must be a sequence of segments");
    for (const auto& s : tr) {
      check_keys(s, "trajectory[]", {"distance", "duration", "speed", "depth"});
      TrajectorySegment seg;
      read(s, "distance", seg.distance, "trajectory");
      read(s, "duration", seg.duration, "trajectory");
      read(s, "speed", seg.speed, "trajectory");
      read(s, "depth", seg.depth, "trajectory");
      c.segments.push_back(seg);
    }
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) config_error("cannot open scenario " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const Error& e) {
    config_error(path.string() + ": " + e.what());
  }
}

std::string dump_scenario(const ScenarioConfig& c) {
  Emit e;
  e.kv("seed", c.seed).kv("dt", c.dt).kv("initial_theta", c.initial_theta);
  e.begin_map("world")
      .kv("pen_radius", c.world.pen_radius)
      .kv("pen_depth", c.world.pen_depth)
      .kv("grid_cell", c.world.grid_cell)
      .kv("twine_width", c.world.twine_width)
      .kv("water_attenuation", c.world.water_attenuation)
      .begin_seq("ropes");
  for (const auto& r : c.world.ropes)
    e.begin_item().kv("theta0", r.theta0).kv("z0", r.z0).kv("theta1", r.theta1).kv("z1", r.z1)
        .kv("width", r.width).end_map();
  e.end_seq().end_map();
  e.begin_map("camera")
      .kv("fx", c.camera.fx).kv("fy", c.camera.fy).kv("cx", c.camera.cx).kv("cy", c.camera.cy)
      .kv("width", c.camera.width).kv("height", c.camera.height)
      .end_map();
  e.begin_map("render").kv("pixel_noise_sigma", c.render.pixel_noise_sigma).end_map();
  e.begin_map("dvl").kv("tilt_deg", rad2deg(c.dvl.tilt)).end_map();
  e.begin_map("noise")
      .kv("dvl_velocity_sigma", c.noise.dvl_velocity_sigma)
      .kv("dvl_range_sigma", c.noise.dvl_range_sigma)
      .kv("echo_sigma", c.noise.echo_sigma)
      .kv("pressure_sigma", c.noise.pressure_sigma)
      .kv("imu_yaw_drift_rate", c.noise.imu_yaw_drift_rate)
      .kv("fish_hit_probability", c.noise.fish_hit_probability)
      .end_map();
  e.begin_map("fish")
      .kv("count", c.fish.count)
      .kv("min_wall_gap", c.fish.min_wall_gap)
      .kv("max_wall_gap", c.fish.max_wall_gap)
      .kv("min_depth", c.fish.min_depth)
      .kv("max_depth", c.fish.max_depth)
      .kv("speed", c.fish.speed)
      .end_map();
  e.begin_map("controller")
      .kv("gain", c.controller.gain)
      .kv("depth_gain", c.controller.depth_gain)
      .kv("heading_amplitude", c.controller.heading_amplitude)
      .kv("heading_period", c.controller.heading_period)
      .end_map();
  e.begin_seq("trajectory");
  for (const auto& s : c.segments)
    e.begin_item().kv("distance", s.distance).kv("duration", s.duration).kv("speed", s.speed)
        .kv("depth", s.depth).end_map();
  e.end_seq();
  return e.str();
}

void save_scenario(const std::filesystem::path& path, const ScenarioConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << dump_scenario(cfg);
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::mt19937_64 frame_rng(std::uint64_t seed, std::uint64_t frame, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(frame), static_cast<std::uint32_t>(frame >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Simulator::Simulator(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  frames_ = cfg_.frame_count();
  std::mt19937_64 fish_rng = frame_rng(cfg_.seed, 0, 3);
  fish_ = FishField::random(cfg_.world, cfg_.fish, fish_rng());
  const auto& first = cfg_.segments.front();
  state_.t = 0;
  state_.position = cyl_to_cart(cfg_.world.pen_radius - first.distance, cfg_.initial_theta);
  state_.z = first.depth;
  state_.psi = wrap_angle(cfg_.initial_theta);
}

SensorFrame Simulator::next() {
  if (done()) throw Error(ErrorCode::InvalidArgument, "simulation finished");
  const GlobalPose pose = state_.pose();
  const ControllerStep step =
      step_controller(cfg_.world, cfg_.controller, state_, cfg_.setpoint_at(state_.t), cfg_.dt);

  SensorFrame frame;
  frame.index = index_;
  auto image_rng = frame_rng(cfg_.seed, static_cast<std::uint64_t>(index_), 1);
  frame.image = render_frame(cfg_.world, fish_, pose.t, pose, cfg_.camera, cfg_.render, image_rng).image;
  auto sensor_rng = frame_rng(cfg_.seed, static_cast<std::uint64_t>(index_), 2);
  sample_sensors(cfg_.world, fish_, pose, step.velocity, cfg_.dvl, cfg_.noise, sensor_rng, frame);
  frame.index = index_;

  state_ = step.next;
  ++index_;
  return frame;
}

void generate_dataset(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  Simulator sim(cfg);
  std::error_code ec;
  fs::create_directories(out_dir / "frames", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "frames").string() + ": " + ec.message());
  save_scenario(out_dir / "scenario.yaml", cfg);

  std::ofstream sensors(out_dir / "sensors.jsonl");
  std::ofstream truth(out_dir / "truth.jsonl");
  if (!sensors || !truth) throw Error(ErrorCode::IoError, "cannot write records in " + out_dir.string());

  while (!sim.done()) {
    const SensorFrame f = sim.next();
    const std::string name = frame_name(f.index);
    write_png(out_dir / name, f.image);
    json s = {{"index", f.index},
              {"t", f.t},
              {"image", name},
              {"dvl_beams", f.dvl_beams},
              {"dvl_velocity", {{"vx", f.dvl_velocity.vx}, {"vy", f.dvl_velocity.vy}}},
              {"echo_range", f.echo_range},
              {"pressure_depth", f.pressure_depth},
              {"imu_yaw", f.imu_yaw}};
    json g = {{"index", f.index},
              {"t", f.t},
              {"r", f.truth.r},
              {"theta", f.truth.theta},
              {"z", f.truth.z},
              {"psi", f.truth.psi},
              {"distance", f.truth_relative.distance},
              {"yaw_rel", f.truth_relative.yaw_rel},
              {"pitch_rel", f.truth_relative.pitch_rel},
              {"true_beams", f.true_beams},
              {"true_echo", f.true_echo},
              {"beam_outliers", f.beam_outlier},
              {"echo_outlier", f.echo_outlier}};
    sensors << s.dump() << '\n';
    truth << g.dump() << '\n';
  }
  if (!sensors || !truth) throw Error(ErrorCode::IoError, "write failed in " + out_dir.string());
}

DatasetReader::DatasetReader(const std::filesystem::path& dir) : dir_(dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) dataset_error("dataset directory not found: " + dir.string());
  const auto scenario_path = dir / "scenario.yaml";
  if (!fs::exists(scenario_path)) dataset_error("missing " + scenario_path.string());
  try {
    scenario_ = load_scenario(scenario_path);
  } catch (const Error& e) {
    dataset_error(std::string("bad scenario copy: ") + e.what());
  }

  const auto sensors = read_jsonl(dir / "sensors.jsonl");
  const auto truth = read_jsonl(dir / "truth.jsonl");
  if (sensors.empty()) dataset_error("dataset has no sensor records: " + dir.string());
  if (sensors.size() != truth.size())
    dataset_error("sensors.jsonl and truth.jsonl differ in record count");

  double last_t = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const auto& s = sensors[i];
    const auto& g = truth[i];
    const std::string where = "record " + std::to_string(i);
    SensorFrame f;
    f.index = field<int>(s, "index", where);
    f.t = field<double>(s, "t", where);
    if (field<int>(g, "index", where) != f.index) dataset_error(where + ": truth index mismatch");
    if (!(f.t > last_t)) dataset_error(where + ": timestamps not increasing");
    last_t = f.t;
    f.dvl_beams = field<std::array<double, 4>>(s, "dvl_beams", where);
    const auto vel = field<json>(s, "dvl_velocity", where);
    f.dvl_velocity = {field<double>(vel, "vx", where), field<double>(vel, "vy", where), f.t};
    f.echo_range = field<double>(s, "echo_range", where);
    f.pressure_depth = field<double>(s, "pressure_depth", where);
    f.imu_yaw = field<double>(s, "imu_yaw", where);

    f.truth = {field<double>(g, "r", where), field<double>(g, "theta", where),
               field<double>(g, "z", where), field<double>(g, "psi", where), f.t};
    f.truth_relative = {field<double>(g, "distance", where), field<double>(g, "yaw_rel", where),
                        field<double>(g, "pitch_rel", where)};
    f.true_beams = field<std::array<double, 4>>(g, "true_beams", where);
    f.true_echo = field<double>(g, "true_echo", where);
    f.beam_outlier = field<std::array<bool, 4>>(g, "beam_outliers", where);
    f.echo_outlier = field<bool>(g, "echo_outlier", where);

    const auto image = field<std::string>(s, "image", where);
    if (!fs::exists(dir / image)) dataset_error(where + ": missing frame " + (dir / image).string());
    frames_.push_back(std::move(f));
    image_paths_.push_back(image);
  }
}

SensorFrame DatasetReader::frame(int i) const {
  if (i < 0 || i >= size()) throw Error(ErrorCode::InvalidArgument, "frame index out of range");
  SensorFrame f = frames_[static_cast<std::size_t>(i)];
  try {
    f.image = read_png(dir_ / image_paths_[static_cast<std::size_t>(i)]);
  } catch (const Error& e) {
    dataset_error(e.what());
  }
  if (f.image.width != scenario_.camera.width || f.image.height != scenario_.camera.height)
    dataset_error("frame " + std::to_string(i) + " size differs from the camera model");
  return f;
}

}  // namespace netpen
