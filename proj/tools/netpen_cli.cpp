// netpen command-line entry point.
//
// Exit codes: 0 success, 1 usage, 2 configuration error, 3 dataset error,
// 4 runtime failure. Log verbosity comes from NETPEN_LOG_LEVEL
// (trace, debug, info, warn, error, off; default info).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "netpen/evaluate.hpp"
#include "netpen/mapping.hpp"
#include "netpen/pipeline.hpp"
#include "netpen/scenario.hpp"

namespace fs = std::filesystem;
using namespace netpen;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kDataset = 3, kRuntime = 4 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("netpen");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("NETPEN_LOG_LEVEL");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

void print_metrics(const Metrics& m) {
  std::printf("%-14s %10s %10s %6s\n", "quantity", "rmse", "max_abs", "n");
  for (const auto& [k, q] : m.quantities) std::printf("%-14s %10.4f %10.4f %6d\n", k.c_str(), q.rmse, q.max_abs, q.count);
  for (std::size_t s = 0; s < m.segment_distance.size(); ++s)
    std::printf("segment %zu: mean true distance %.3f m, distance rmse %.4f m (fft %.4f m)\n", s,
                m.segment_commanded[s], m.segment_distance[s].rmse, m.segment_distance_fft[s].rmse);
  std::printf("radial |r_int - r_fit| < 0.1 m on %.1f%% of frames, %d excursions (%d off schedule)\n",
              100.0 * m.radial_within_fraction, m.radial_excursions, m.radial_excursions_off_schedule);
  std::printf("yaw vs imu after alignment: max residual %.3f deg, drift %.5f deg/s\n",
              rad2deg(m.yaw_max_residual), rad2deg(m.yaw_drift_rate));
  std::printf("acoustic outliers (>3 sigma): dvl %d, echo %d over %d frames; degraded frames %d\n",
              m.dvl_outliers, m.echo_outliers, m.frames, m.degraded_frames);
}

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [k, e] : m.quantities) q[k] = {{"rmse", e.rmse}, {"max_abs", e.max_abs}, {"count", e.count}};
  nlohmann::json seg = nlohmann::json::array();
  for (std::size_t s = 0; s < m.segment_distance.size(); ++s)
    seg.push_back({{"mean_true_distance", m.segment_commanded[s]},
                   {"distance_rmse", m.segment_distance[s].rmse},
                   {"distance_fft_rmse", m.segment_distance_fft[s].rmse}});
  return {{"frames", m.frames},
          {"quantities", q},
          {"segments", seg},
          {"radial_within_fraction", m.radial_within_fraction},
          {"radial_excursions", m.radial_excursions},
          {"radial_excursions_off_schedule", m.radial_excursions_off_schedule},
          {"yaw_max_residual_deg", rad2deg(m.yaw_max_residual)},
          {"yaw_drift_rate_deg_per_s", rad2deg(m.yaw_drift_rate)},
          {"dvl_outliers", m.dvl_outliers},
          {"echo_outliers", m.echo_outliers},
          {"degraded_frames", m.degraded_frames}};
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Net-pen localization and mapping toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, dataset_dir, config_path, format = "ply", output;
  std::uint64_t seed = 0;
  bool no_map = false, exclude_degraded = false;
  int window = 0;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset from a scenario file");
  sim->add_option("scenario", scenario_path, "Scenario YAML")->required();
  sim->add_option("out", out_dir, "Output dataset directory")->required();
  auto* seed_opt = sim->add_option("--seed", seed, "Override the scenario seed");

  auto* run = app.add_subcommand("run", "Run the pipeline on a dataset");
  run->add_option("dataset", dataset_dir, "Dataset directory")->required();
  run->add_option("config", config_path, "Pipeline YAML")->required();
  run->add_option("out", out_dir, "Output directory")->required();
  run->add_flag("--no-map", no_map, "Skip occupancy mapping");
  run->add_flag("--exclude-degraded", exclude_degraded, "Keep degraded frames out of the map and cloud");
  run->add_option("--smoothing-window", window, "Odd smoothing window for plots");

  auto* eval = app.add_subcommand("evaluate", "Compute metrics and plot CSVs for a run");
  eval->add_option("out", out_dir, "Run output directory")->required();
  eval->add_option("--smoothing-window", window, "Odd smoothing window for plots");

  auto* exp = app.add_subcommand("export-map", "Export the occupancy map of a run");
  exp->add_option("out", out_dir, "Run output directory")->required();
  exp->add_option("--format", format, "ply or dump")->check(CLI::IsMember({"ply", "dump"}));
  exp->add_option("--output", output, "Destination file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) {
      ScenarioConfig cfg = load_scenario(scenario_path);
      if (*seed_opt) cfg.seed = seed;
      spdlog::info("simulating {} frames into {}", cfg.frame_count(), out_dir);
      generate_dataset(cfg, out_dir);
    } else if (*run) {
      PipelineConfig cfg = load_pipeline_config(config_path);
      if (no_map) cfg.build_map = false;
      if (exclude_degraded) cfg.exclude_degraded = true;
      if (window) cfg.smoothing_window = window;
      cfg.validate();
      const RunReport report = run_pipeline(dataset_dir, cfg, out_dir);
      const auto& total = report.timing.at("total");
      spdlog::info("{} frames, median latency {:.1f} ms, p90 {:.1f} ms", report.frames.size(), total.p50, total.p90);
      print_metrics(report.metrics);
    } else if (*eval) {
      RunReport report = read_report_json(fs::path(out_dir) / "report.json");
      const int w = window ? window : report.smoothing_window;
      if (w < 1 || w % 2 == 0) throw Error(ErrorCode::ConfigError, "--smoothing-window must be odd and >= 1");
      const auto est = report.estimates();
      const auto tru = report.truths();
      write_plot_csvs(out_dir, est, tru, w);
      std::ofstream os(fs::path(out_dir) / "metrics.json");
      if (!os) throw Error(ErrorCode::IoError, "cannot write metrics.json");
      os << metrics_to_json(report.metrics).dump(1) << '\n';
      print_metrics(report.metrics);
    } else if (*exp) {
      const fs::path src = fs::path(out_dir) / "map.npmap";
      if (!fs::exists(src)) throw Error(ErrorCode::DatasetError, "no map in " + out_dir + " (run without --no-map)");
      const OccupancyMap map = OccupancyMap::load(src);
      if (format == "ply") {
        const fs::path dst = output.empty() ? fs::path(out_dir) / "map.ply" : fs::path(output);
        const auto cloud = map_surface_cloud(map);
        write_ply(dst, cloud);
        spdlog::info("wrote {} occupied leaves to {}", cloud.size(), dst.string());
      } else {
        const fs::path dst = output.empty() ? fs::path(out_dir) / "map_export.npmap" : fs::path(output);
        map.save(dst);
        spdlog::info("wrote {} leaves to {}", map.leaf_count(), dst.string());
      }
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    switch (e.code()) {
      case ErrorCode::ConfigError: return kConfig;
      case ErrorCode::DatasetError: return kDataset;
      default: return kRuntime;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntime;
  }
  return kOk;
}
