#pragma once

// Scenario configuration (YAML), the streaming simulator built on it, and the
// on-disk dataset layout:
//
//   <dir>/scenario.yaml    configuration copy
//   <dir>/frames/NNNNNN.png
//   <dir>/sensors.jsonl    one record per frame, what the vehicle measured
//   <dir>/truth.jsonl      one record per frame, simulator ground truth

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "netpen/simpen.hpp"

namespace netpen {

struct TrajectorySegment {
  double distance = 1.0;  ///< commanded net distance [m]
  double duration = 20.0; ///< s
  double speed = 0.2;     ///< along-net speed [m/s]
  double depth = 4.0;     ///< commanded depth [m]
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double dt = 0.1;
  PenWorld world;
  Camera camera{800, 800, 320, 240, 640, 480};
  RenderSettings render;
  DvlBeamGeometry dvl;
  SensorNoise noise;
  FishConfig fish;
  ControllerConfig controller;
  double initial_theta = 0.0;
  std::vector<TrajectorySegment> segments;

  void validate() const;
  double duration() const;
  int frame_count() const;
  /// Times at which the commanded setpoint changes.
  std::vector<double> setpoint_changes() const;
  Setpoint setpoint_at(double t) const;

  /// Three 20 s segments at 1.0, 2.1 and 1.5 m, no fish, default noise.
  static ScenarioConfig standard();
};

ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(const std::string& yaml_text);
std::string dump_scenario(const ScenarioConfig& cfg);
void save_scenario(const std::filesystem::path& path, const ScenarioConfig& cfg);

/// Steps the scenario frame by frame; nothing is kept beyond the current state.
class Simulator {
public:
  explicit Simulator(ScenarioConfig cfg);

  bool done() const { return index_ >= frames_; }
  int frame_count() const { return frames_; }
  /// Renders and samples the current frame, then advances the vehicle.
  SensorFrame next();

  const ScenarioConfig& config() const { return cfg_; }
  const FishField& fish() const { return fish_; }
  const VehicleState& state() const { return state_; }

private:
  ScenarioConfig cfg_;
  FishField fish_;
  VehicleState state_;
  int index_ = 0;
  int frames_ = 0;
};

/// Per-frame RNG stream derived from (seed, frame, stream).
std::mt19937_64 frame_rng(std::uint64_t seed, std::uint64_t frame, std::uint64_t stream);

void generate_dataset(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

/// Reads a dataset written by generate_dataset. Schema problems throw
/// DatasetError; frames are decoded on demand.
class DatasetReader {
public:
  explicit DatasetReader(const std::filesystem::path& dir);

  const ScenarioConfig& scenario() const { return scenario_; }
  int size() const { return static_cast<int>(frames_.size()); }
  /// Frame i with image loaded; truth fields filled from truth.jsonl.
  SensorFrame frame(int i) const;

private:
  std::filesystem::path dir_;
  ScenarioConfig scenario_;
  std::vector<SensorFrame> frames_;  // without images
  std::vector<std::string> image_paths_;
};

}  // namespace netpen
