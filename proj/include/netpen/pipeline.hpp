#pragma once

// End-to-end frame loop: FFT priors, net-relative pose, depth completion,
// global pose fusion, occupancy mapping and point-cloud stacking.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "netpen/depthfill.hpp"
#include "netpen/evaluate.hpp"
#include "netpen/globalpose.hpp"
#include "netpen/mapping.hpp"
#include "netpen/netfft.hpp"
#include "netpen/relpose.hpp"
#include "netpen/scenario.hpp"

namespace netpen {

struct PipelineConfig {
  FftConfig fft;
  CompletionStrategy completion;
  int depth_pose_stride = 8;  ///< pixel stride when fitting the completed depth map
  bool build_map = true;
  double map_resolution = 0.05;
  int map_ray_stride = 16;
  InverseSensorModel sensor_model;
  int cloud_stride = 16;
  bool exclude_degraded = false;
  bool write_depth = false;
  int smoothing_window = 11;
  /// Priors off the common plane by more than this fraction of their depth are dropped; 0 disables.
  double prior_plane_tolerance = 0.03;

  void validate() const;
};

PipelineConfig parse_pipeline_config(const std::string& yaml_text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
std::string dump_pipeline_config(const PipelineConfig& cfg);

/// Wall-clock milliseconds per stage.
struct StageTiming {
  double priors = 0;
  double relpose = 0;
  double depth = 0;
  double fusion = 0;
  double map = 0;
  double cloud = 0;
  double total = 0;
};

struct FrameRecord {
  FrameEstimate estimate;
  FrameTruth truth;
  StageTiming timing;
};

struct Percentiles {
  double p50 = 0, p90 = 0, p99 = 0, max = 0;
};

struct RunReport {
  std::vector<FrameRecord> frames;
  Metrics metrics;
  std::map<std::string, Percentiles> timing;
  std::vector<double> setpoint_changes;
  std::vector<double> segment_bounds;
  int smoothing_window = 11;

  std::vector<FrameEstimate> estimates() const;
  std::vector<FrameTruth> truths() const;
};

/// Percentiles by nearest rank.
Percentiles percentiles(std::vector<double> values);

/// Stateful per-frame processing; frames must arrive in timestamp order.
class Pipeline {
public:
  Pipeline(const ScenarioConfig& scenario, PipelineConfig cfg);

  FrameRecord process(const SensorFrame& frame);
  /// Completed depth of the last processed frame, if any.
  const std::optional<DepthImage>& last_depth() const { return last_depth_; }

  const OccupancyMap* map() const { return map_ ? &*map_ : nullptr; }
  const ColoredPointCloud& cloud() const { return cloud_; }
  const PipelineConfig& config() const { return cfg_; }

  /// Metrics and timing summary over everything processed so far.
  RunReport report() const;

private:
  ScenarioConfig scenario_;
  PipelineConfig cfg_;
  GlobalPoseTracker tracker_;
  std::optional<OccupancyMap> map_;
  ColoredPointCloud cloud_;
  std::vector<FrameRecord> records_;
  std::optional<DepthImage> last_depth_;
};

/// Runs a dataset directory through the pipeline and writes poses.csv,
/// poses.jsonl, cloud.ply, map.npmap, report.json and scenario.yaml into
/// out_dir (depth/ rasters when enabled).
RunReport run_pipeline(const std::filesystem::path& dataset, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir);

void write_report_json(const std::filesystem::path& path, const RunReport& report, bool include_timing = true);
RunReport read_report_json(const std::filesystem::path& path);

}  // namespace netpen
