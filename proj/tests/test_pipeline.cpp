#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "netpen/pipeline.hpp"
#include "support.hpp"

using namespace netpen;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

int line_count(const fs::path& p) {
  std::ifstream is(p);
  int n = 0;
  std::string line;
  while (std::getline(is, line)) ++n;
  return n;
}

ScenarioConfig short_scenario() {
  ScenarioConfig c = ScenarioConfig::standard();
  c.segments = {{1.0, 1.0, 0.2, 4.0}, {1.6, 1.0, 0.2, 4.0}};
  return c;
}

const fs::path& shared_dataset() {
  static const fs::path dir = [] {
    const auto d = test::scratch_dir("pipeline_dataset");
    generate_dataset(short_scenario(), d);
    return d;
  }();
  return dir;
}

TEST(PipelineConfig, ParseDumpValidate) {
  PipelineConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(dump_pipeline_config(parse_pipeline_config("")), dump_pipeline_config(c));
  c.completion.kind = CompletionKind::ConstantMean;
  c.map_resolution = 0.1;
  c.smoothing_window = 5;
  c.fft.prefer_vertical = false;
  c.prior_plane_tolerance = 0;
  const PipelineConfig back = parse_pipeline_config(dump_pipeline_config(c));
  EXPECT_EQ(dump_pipeline_config(back), dump_pipeline_config(c));
  EXPECT_EQ(back.completion.kind, CompletionKind::ConstantMean);
  EXPECT_FALSE(back.fft.prefer_vertical);

  for (const char* bad : {"nope: 1\n", "smoothing_window: 4\n", "fft:\n  patch_size: 100\n",
                          "completion:\n  strategy: neural\n", "map:\n  hit_logodds: -1\n",
                          "prior_plane_tolerance: -0.1\n", "[1, 2]\n"}) {
    try {
      parse_pipeline_config(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigError) << bad;
    }
  }
}

TEST(Percentiles, NearestRank) {
  const auto p = percentiles({5, 1, 4, 2, 3, 10, 9, 8, 7, 6});
  EXPECT_EQ(p.p50, 5);
  EXPECT_EQ(p.p90, 9);
  EXPECT_EQ(p.p99, 10);
  EXPECT_EQ(p.max, 10);
  EXPECT_EQ(percentiles({}).max, 0);
}

TEST(RunPipeline, OneRecordPerFrameAndOutputs) {
  const auto out = test::scratch_dir("pipeline_out");
  const RunReport report = run_pipeline(shared_dataset(), {}, out);
  ASSERT_EQ(report.frames.size(), 20u);
  for (std::size_t i = 0; i < report.frames.size(); ++i) {
    const auto& f = report.frames[i];
    EXPECT_EQ(f.estimate.index, static_cast<int>(i));
    EXPECT_FALSE(f.estimate.degraded);
    EXPECT_NEAR(f.estimate.distance, f.truth.distance, 0.05 * f.truth.distance);
    EXPECT_GT(f.timing.total, 0);
  }
  EXPECT_EQ(report.frames.front().estimate.theta, 0.0);
  EXPECT_EQ(report.setpoint_changes, (std::vector<double>{1.0}));
  for (const char* name : {"poses.csv", "poses.jsonl", "cloud.ply", "map.npmap", "report.json", "scenario.yaml"})
    EXPECT_TRUE(fs::exists(out / name)) << name;
  EXPECT_EQ(line_count(out / "poses.csv"), 21);
  EXPECT_EQ(line_count(out / "poses.jsonl"), 20);
  EXPECT_EQ(slurp(out / "poses.csv").substr(0, 40).find("t,r,theta,z,psi"), 0u);

  const RunReport back = read_report_json(out / "report.json");
  ASSERT_EQ(back.frames.size(), 20u);
  EXPECT_EQ(back.frames[7].estimate.distance, report.frames[7].estimate.distance);
  EXPECT_EQ(back.metrics.frames, 20);

  const OccupancyMap map = OccupancyMap::load(out / "map.npmap");
  EXPECT_GT(map.leaf_count(), 0u);
  EXPECT_EQ(read_ply(out / "cloud.ply").size(), 20u * 40 * 30);
}

TEST(RunPipeline, ReproducibleExceptTiming) {
  const auto a = test::scratch_dir("pipeline_rep_a");
  const auto b = test::scratch_dir("pipeline_rep_b");
  PipelineConfig cfg;
  cfg.build_map = false;
  const RunReport ra = run_pipeline(shared_dataset(), cfg, a);
  const RunReport rb = run_pipeline(shared_dataset(), cfg, b);
  write_report_json(a / "untimed.json", ra, false);
  write_report_json(b / "untimed.json", rb, false);
  EXPECT_EQ(slurp(a / "untimed.json"), slurp(b / "untimed.json"));
  EXPECT_EQ(slurp(a / "poses.csv"), slurp(b / "poses.csv"));
  EXPECT_EQ(slurp(a / "cloud.ply"), slurp(b / "cloud.ply"));
  EXPECT_FALSE(fs::exists(a / "map.npmap"));
}

TEST(Pipeline, StreamingMatchesDatasetRun) {
  PipelineConfig cfg;
  cfg.build_map = false;
  const auto out = test::scratch_dir("pipeline_stream");
  const RunReport batch = run_pipeline(shared_dataset(), cfg, out);
  Simulator sim(short_scenario());
  Pipeline pipe(sim.config(), cfg);
  std::size_t i = 0;
  while (!sim.done()) {
    const FrameRecord r = pipe.process(sim.next());
    ASSERT_LT(i, batch.frames.size());
    EXPECT_EQ(r.estimate.distance, batch.frames[i].estimate.distance);
    EXPECT_EQ(r.estimate.psi, batch.frames[i].estimate.psi);
    EXPECT_EQ(r.truth.r, batch.frames[i].truth.r);
    ++i;
  }
  EXPECT_EQ(i, batch.frames.size());
  EXPECT_TRUE(pipe.last_depth());
  EXPECT_EQ(pipe.map(), nullptr);
}

TEST(RunPipeline, EmptyDatasetIsASchemaError) {
  const auto dir = test::scratch_dir("pipeline_empty");
  save_scenario(dir / "scenario.yaml", short_scenario());
  std::ofstream(dir / "sensors.jsonl").flush();
  std::ofstream(dir / "truth.jsonl").flush();
  try {
    run_pipeline(dir, {}, test::scratch_dir("pipeline_empty_out"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DatasetError);
  }
}

}  // namespace
