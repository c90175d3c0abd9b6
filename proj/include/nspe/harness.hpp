#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nspe/analysis.hpp"
#include "nspe/estimators.hpp"
#include "nspe/network.hpp"

namespace nspe {

struct TauPolicy {
  enum class Mode { Auto, Fixed } mode = Mode::Auto;
  double factor = 0.25;  // Auto: tau = factor * min_{t!=p} ||q_t - q_p||^2
  double value = 0.0;    // Fixed
  std::vector<std::tuple<PairRef, PairRef, double>> overrides;
  double resolve(const GroundTruth& truth) const;
};

struct ExperimentConfig {
  std::vector<TaskSpec> tasks;  // dense ids
  std::vector<NodeSpec> nodes;
  Topology topology;
  std::vector<int> task_ext;  // dense id -> external label
  std::vector<int> node_ext;

  std::uint64_t iterations = 1;
  std::uint64_t runs = 1;
  std::uint64_t master_seed = 1;
  std::vector<Variant> variants;
  TauPolicy tau;
  double snr_lo_db = 10.0;
  double snr_hi_db = 20.0;
  StepSchedule schedule;
  bool freeze_truth = false;
  double init_phi = 0.0;
  double init_varsigma = 0.0;
  int trace_points = 500;
  std::string output_dir = "out";

  std::shared_ptr<Network> network() const;  // builds and validates
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

struct RunRecord {
  std::uint64_t run = 0;
  std::vector<double> sigma_u;  // per node, post calibration
  double tau = 0.0;
  // per variant: steady-state group MSD (linear), stream hash, divergence
  std::vector<std::map<std::string, double>> steady_msd;
  std::vector<std::uint64_t> stream_hash;
  std::vector<bool> diverged;
  std::vector<std::uint64_t> diverged_at;
  // Per variant, per stacked pair: trailing-window mean of q - phi (empty for
  // diverged variants).
  std::vector<std::vector<Vec>> mean_error;
  // Per-run MSD traces, retained only for small run counts (runs <= 10).
  std::vector<MsdTrace> traces;
  double wall_seconds = 0.0;
};

struct LinkRecord {
  std::uint64_t run;
  PairRef owner;   // (k, t)
  PairRef member;  // (l, p)
  bool kept;
};

struct VariantResult {
  VariantConfig config;
  MsdTrace mean_trace;  // averaged over completed runs, all groupings
  std::map<std::string, double> steady_msd_linear;
  std::map<std::string, double> steady_msd_db;
  std::vector<Vec> mean_error;  // per pair, trailing-window mean of q - phi
  std::uint64_t completed_runs = 0;
  std::uint64_t diverged_runs = 0;
  double steady_slope_db_per_100 = 0.0;
  bool steady_declared = false;
  // UD-NSPE
  double precision = 1.0, recall = 1.0;
  double false_alarm_rate = 0.0, misdetection_rate = 0.0;
  ClusterAccuracy accuracy_trace;
  std::vector<LinkRecord> links;  // steady-state links per run
  // BlindDNSPE: closed-form steady-state prediction paired with the empirical mean error
  bool bias_available = false;
  BiasPrediction bias;  // averaged over runs (identical when truth is frozen)
};

struct AggregatedResults {
  std::vector<VariantResult> variants;
  std::vector<RunRecord> runs;
  double wall_seconds = 0.0;
};

AggregatedResults run_experiment(const ExperimentConfig& config);

// Throws io_error unless dir exists (or can be created) and is writable.
void ensure_writable(const std::string& dir);

// Writes traces.csv, links.csv and summary.json into config.output_dir.
void emit_outputs(const AggregatedResults& results,
                  const ExperimentConfig& config);

std::string summary_json(const AggregatedResults& results,
                         const ExperimentConfig& config);

}  // namespace nspe
