// Command-line front end: run experiments, evaluate the steady-state bias
// prediction, or validate a config without running anything.
//
// Exit codes: 0 success, 2 configuration/model error, 3 divergence during a
// run, 4 I/O error.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "nspe/analysis.hpp"
#include "nspe/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::uint64_t runs = 0;
  std::uint64_t iters = 0;
  bool has_seed = false, has_runs = false, has_iters = false;
};

nspe::ExperimentConfig load(const Options& opt) {
  nspe::ExperimentConfig cfg = nspe::load_config(opt.config_path);
  if (opt.has_seed) cfg.master_seed = opt.seed;
  if (opt.has_runs) cfg.runs = opt.runs;
  if (opt.has_iters) cfg.iterations = opt.iters;
  if (opt.has_runs && cfg.runs < 1)
    throw nspe::config_error("--runs must be >= 1");
  if (opt.has_iters && cfg.iterations < 1)
    throw nspe::config_error("--iters must be >= 1");
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  return cfg;
}

int cmd_run(const Options& opt) {
  nspe::ExperimentConfig cfg = load(opt);
  // Fail on an unwritable destination before burning compute.
  nspe::ensure_writable(cfg.output_dir);
  nspe::AggregatedResults res = nspe::run_experiment(cfg);
  nspe::emit_outputs(res, cfg);
  std::uint64_t diverged = 0;
  for (const auto& v : res.variants) {
    diverged += v.diverged_runs;
    std::cout << nspe::variant_name(v.config.kind)
              << ": steady network MSD = " << v.steady_msd_db.at("network")
              << " dB (" << v.completed_runs << " runs, " << v.diverged_runs
              << " diverged)\n";
  }
  std::cout << "outputs written to " << cfg.output_dir << " ("
            << res.wall_seconds << " s)\n";
  return diverged > 0 ? kExitDivergence : 0;
}

int cmd_bias(const Options& opt) {
  nspe::ExperimentConfig cfg = load(opt);
  // The prediction is evaluated at the run-0 draw of the ground truth (the
  // draw every run shares when freeze_truth is on).
  nspe::Rng trng = nspe::Rng::from(cfg.master_seed, nspe::purpose::kTruth, 0);
  nspe::GroundTruth truth;
  for (const nspe::TaskSpec& t : cfg.tasks) {
    nspe::Vec q(t.dim);
    for (int m = 0; m < t.dim; ++m) q[m] = trng.uniform_open();
    truth.values.push_back(q);
  }
  std::vector<nspe::NodeSpec> nodes = cfg.nodes;
  for (size_t k = 0; k < nodes.size(); ++k) {
    if (!nodes[k].auto_snr) continue;
    nspe::Rng rng =
        nspe::Rng::from(cfg.master_seed, nspe::purpose::kCalibration, 0, k);
    nodes[k].regressor_var = nspe::calibrate_snr(nodes[k], truth, cfg.snr_lo_db,
                                                 cfg.snr_hi_db, rng);
    nodes[k].auto_snr = false;
  }
  nspe::Network net(cfg.tasks, nodes, cfg.topology);
  std::vector<nspe::CombinationWeights> ws;
  for (const nspe::PairRef& pr : net.pairs())
    ws.push_back(nspe::blind_weights(pr, net));
  const nspe::BiasPrediction pred =
      nspe::theoretical_bias(nspe::build_weight_matrix(ws, net), net, truth);

  nlohmann::json j;
  j["spectral_radius"] = pred.spectral_radius;
  j["converged"] = pred.converged;
  nlohmann::json bounds;
  for (size_t k = 0; k < nodes.size(); ++k)
    bounds[std::to_string(cfg.node_ext[k])] = {
        {"step_size", nodes[k].step_size},
        {"bound", nspe::step_size_bound(nodes[k])},
        {"regressor_var", nodes[k].regressor_var}};
  j["step_size"] = bounds;
  nlohmann::json pairs = nlohmann::json::array(),
                 bias = nlohmann::json::array();
  for (int q = 0; q < net.num_pairs(); ++q) {
    const nspe::PairRef pr = net.pairs()[q];
    pairs.push_back({cfg.node_ext[pr.node], cfg.task_ext[pr.task]});
    nlohmann::json row = nlohmann::json::array();
    if (pred.converged)
      for (int c = 0; c < pred.bias[q].size(); ++c)
        row.push_back(pred.bias[q][c]);
    bias.push_back(row);
  }
  j["pairs"] = pairs;
  j["bias"] = bias;
  const std::string text = j.dump(2) + "\n";
  if (opt.out_dir.empty()) {
    std::cout << text;
  } else {
    nspe::ensure_writable(opt.out_dir);
    std::ofstream f(std::filesystem::path(opt.out_dir) / "bias.json");
    if (!f) throw nspe::io_error("cannot write bias.json");
    f << text;
    std::cout << "bias report written to " << opt.out_dir << "/bias.json\n";
  }
  return 0;
}

int cmd_validate(const Options& opt) {
  nspe::ExperimentConfig cfg = load(opt);  // throws config_error on problems
  auto net = cfg.network();
  std::cout << "config OK: " << net->num_nodes() << " nodes, "
            << net->num_tasks() << " tasks, " << net->num_pairs()
            << " node-task pairs, " << cfg.topology.edges.size() << " edges\n";
  for (int k = 0; k < net->num_nodes(); ++k) {
    const nspe::NodeSpec& nd = net->node(k);
    if (nd.auto_snr) continue;
    const double bound = nspe::step_size_bound(nd);
    if (nd.step_size >= bound)
      std::cout << "warning: node " << cfg.node_ext[k] << " step size "
                << nd.step_size << " >= mean-stability bound " << bound
                << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffusion-network node-specific parameter estimation"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON experiment config")
        ->required();
    sub->add_option("--seed", opt.seed, "override master seed")
        ->each([&](const std::string&) { opt.has_seed = true; });
  };
  CLI::App* run = app.add_subcommand("run", "run the Monte Carlo experiment");
  add_common(run);
  run->add_option("--out", opt.out_dir, "output directory (overrides config)");
  run->add_option("--runs", opt.runs, "override run count")
      ->each([&](const std::string&) { opt.has_runs = true; });
  run->add_option("--iters", opt.iters, "override iteration count")
      ->each([&](const std::string&) { opt.has_iters = true; });

  CLI::App* bias =
      app.add_subcommand("bias", "steady-state bias prediction report");
  add_common(bias);
  bias->add_option("--out", opt.out_dir, "write bias.json here (else stdout)");

  CLI::App* validate =
      app.add_subcommand("validate", "check a config without running");
  add_common(validate);

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(opt);
    if (bias->parsed()) return cmd_bias(opt);
    return cmd_validate(opt);
  } catch (const nspe::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const nspe::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    // model/calibration/exchange problems all stem from the configuration
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
