#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "nspe/harness.hpp"

using namespace nspe;
using nlohmann::json;

namespace {

const char* kSmallConfig = R"({
  "network": {
    "tasks": [{"id": 10, "dim": 2}, {"id": 20, "dim": 2}, {"id": 30, "dim": 2}],
    "nodes": [
      {"id": 100, "tasks": [10, 30], "step_size": 0.02, "noise_var": 0.001, "regressor_var": 1.0},
      {"id": 200, "tasks": [20, 30], "step_size": 0.02, "noise_var": 0.001, "regressor_var": "auto-snr"}
    ],
    "edges": [[100, 200]]
  },
  "experiment": {
    "iterations": 400,
    "runs": 3,
    "master_seed": 5,
    "variants": ["non_cooperative", "ud_nspe"],
    "tau": {"mode": "auto", "factor": 0.25},
    "trace_points": 20,
    "output_dir": "out/test_small"
  }
})";

json strip_timing(const std::string& text) {
  json j = json::parse(text);
  j.erase("timing");
  return j;
}

}  // namespace

TEST_CASE("config parsing maps external ids to dense indices") {
  const ExperimentConfig cfg = parse_config(kSmallConfig);
  CHECK(cfg.node_ext == std::vector<int>{100, 200});
  CHECK(cfg.task_ext == std::vector<int>{10, 20, 30});
  CHECK(cfg.nodes[1].tasks == std::vector<int>{1, 2});
  CHECK(cfg.nodes[1].auto_snr);
  CHECK(cfg.topology.edges == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(cfg.variants ==
        std::vector<Variant>{Variant::NonCooperative, Variant::UDNSPE});
}

TEST_CASE("config errors name the offending field") {
  auto expect_error = [](const std::string& text, const std::string& hint) {
    try {
      parse_config(text);
      FAIL_CHECK("expected config_error for ", hint);
    } catch (const config_error& e) {
      CHECK(std::string(e.what()).find(hint) != std::string::npos);
    }
  };
  expect_error("{}", "network");
  expect_error(R"({"network": {"tasks": [], "nodes": [], "edges": []}})",
               "empty");
  json j = json::parse(kSmallConfig);
  j["network"]["nodes"][0].erase("step_size");
  expect_error(j.dump(), "step_size");
  j = json::parse(kSmallConfig);
  j["network"]["nodes"][0]["tasks"] = {10, 99};
  expect_error(j.dump(), "unknown task");
  j = json::parse(kSmallConfig);
  j["experiment"].erase("tau");
  expect_error(j.dump(), "tau");
  j = json::parse(kSmallConfig);
  j["experiment"]["tau"] = {{"mode", "fixed"}, {"value", -1.0}};
  expect_error(j.dump(), "tau.value");
  j = json::parse(kSmallConfig);
  j["network"]["edges"] = {{100, 200}, {100, 100}};
  expect_error(j.dump(), "topology");
}

TEST_CASE("tau resolution") {
  GroundTruth t;
  t.values.push_back((Vec(1) << 0.0).finished());
  t.values.push_back((Vec(1) << 2.0).finished());
  t.values.push_back((Vec(1) << 3.0).finished());
  TauPolicy p;  // auto, factor 0.25; min separation is 1
  CHECK(p.resolve(t) == doctest::Approx(0.25));
  p.mode = TauPolicy::Mode::Fixed;
  p.value = 7.0;
  CHECK(p.resolve(t) == doctest::Approx(7.0));
}

TEST_CASE("experiment is deterministic given config and seed") {
  const ExperimentConfig cfg = parse_config(kSmallConfig);
  const AggregatedResults a = run_experiment(cfg);
  const AggregatedResults b = run_experiment(cfg);
  CHECK(strip_timing(summary_json(a, cfg)) == strip_timing(summary_json(b, cfg)));
}

TEST_CASE("aggregated trace is the mean of per-run traces") {
  const ExperimentConfig cfg = parse_config(kSmallConfig);
  const AggregatedResults res = run_experiment(cfg);
  REQUIRE(res.runs.size() == 3);
  for (size_t v = 0; v < res.variants.size(); ++v) {
    const auto& mean = res.variants[v].mean_trace;
    for (const auto& [group, series] : mean.linear) {
      for (size_t p = 0; p < series.size(); ++p) {
        double s = 0;
        for (const RunRecord& r : res.runs)
          s += r.traces.at(v).linear.at(group).at(p);
        CHECK(series[p] ==
              doctest::Approx(s / res.runs.size()).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("per-run mean error matches the aggregate") {
  const ExperimentConfig cfg = parse_config(kSmallConfig);
  const AggregatedResults res = run_experiment(cfg);
  const auto& vr = res.variants[0];
  for (size_t q = 0; q < vr.mean_error.size(); ++q) {
    Vec s = Vec::Zero(vr.mean_error[q].size());
    for (const RunRecord& r : res.runs) s += r.mean_error.at(0).at(q);
    CHECK((vr.mean_error[q] - s / double(res.runs.size()))
              .lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("frozen truth pins calibration across runs") {
  ExperimentConfig cfg = parse_config(kSmallConfig);
  cfg.freeze_truth = true;
  const AggregatedResults res = run_experiment(cfg);
  for (const RunRecord& r : res.runs) {
    CHECK(r.sigma_u == res.runs[0].sigma_u);
    CHECK(r.tau == res.runs[0].tau);
  }
  // Observation streams still differ run to run.
  CHECK(res.runs[0].stream_hash[0] != res.runs[1].stream_hash[0]);
}

TEST_CASE("variants share streams within a run") {
  const ExperimentConfig cfg = parse_config(kSmallConfig);
  const AggregatedResults res = run_experiment(cfg);
  for (const RunRecord& r : res.runs)
    CHECK(r.stream_hash[0] == r.stream_hash[1]);
}

TEST_CASE("outputs land on disk; unwritable destinations throw io_error") {
  ExperimentConfig cfg = parse_config(kSmallConfig);
  cfg.output_dir = "out/test_emit";
  const AggregatedResults res = run_experiment(cfg);
  emit_outputs(res, cfg);
  namespace fs = std::filesystem;
  CHECK(fs::exists(fs::path(cfg.output_dir) / "traces.csv"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "links.csv"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "summary.json"));
  {
    std::ifstream f(fs::path(cfg.output_dir) / "traces.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header == "iteration,algorithm,group,msd_linear,msd_db");
  }
  // A path component that is a regular file cannot become a directory.
  std::ofstream(fs::path(cfg.output_dir) / "blocker").put('x');
  CHECK_THROWS_AS(ensure_writable(cfg.output_dir + "/blocker/sub"), io_error);
}
