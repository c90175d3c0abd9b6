#include "nspe/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "nspe/data.hpp"
#include "nspe/rng.hpp"

namespace nspe {

using nlohmann::json;
namespace fs = std::filesystem;

double TauPolicy::resolve(const GroundTruth& truth) const {
  if (mode == Mode::Fixed) {
    if (!(value > 0.0)) throw config_error("tau.value must be > 0");
    return value;
  }
  double min_d = std::numeric_limits<double>::infinity();
  const int T = static_cast<int>(truth.values.size());
  for (int t = 0; t < T; ++t)
    for (int p = t + 1; p < T; ++p) {
      if (truth.values[t].size() != truth.values[p].size()) continue;
      min_d = std::min(min_d,
                       (truth.values[t] - truth.values[p]).squaredNorm());
    }
  if (!std::isfinite(min_d))
    throw config_error("tau.mode=auto needs at least two comparable tasks");
  return factor * min_d;
}

std::shared_ptr<Network> ExperimentConfig::network() const {
  return std::make_shared<Network>(tasks, nodes, topology);
}

namespace {

json require(const json& j, const char* key, const char* where) {
  if (!j.contains(key))
    throw config_error(std::string(where) + ": missing field '" + key + "'");
  return j.at(key);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  const json net = require(j, "network", "config");
  const json jtasks = require(net, "tasks", "network");
  const json jnodes = require(net, "nodes", "network");
  const json jedges = require(net, "edges", "network");

  std::map<int, int> task_dense, node_dense;
  for (const auto& jt : jtasks) {
    TaskSpec t;
    const int ext = require(jt, "id", "network.tasks[]").get<int>();
    t.dim = require(jt, "dim", "network.tasks[]").get<int>();
    if (t.dim < 1)
      throw config_error("network.tasks: task " + std::to_string(ext) +
                         " has dim < 1");
    if (task_dense.count(ext))
      throw config_error("network.tasks: duplicate task id " +
                         std::to_string(ext));
    t.id = static_cast<int>(cfg.tasks.size());
    task_dense[ext] = t.id;
    cfg.task_ext.push_back(ext);
    cfg.tasks.push_back(t);
  }
  for (const auto& jn : jnodes) {
    NodeSpec n;
    const int ext = require(jn, "id", "network.nodes[]").get<int>();
    if (node_dense.count(ext))
      throw config_error("network.nodes: duplicate node id " +
                         std::to_string(ext));
    n.id = static_cast<int>(cfg.nodes.size());
    node_dense[ext] = n.id;
    cfg.node_ext.push_back(ext);
    for (const auto& jt : require(jn, "tasks", "network.nodes[]")) {
      const int text_id = jt.get<int>();
      auto it = task_dense.find(text_id);
      if (it == task_dense.end())
        throw config_error("network.nodes: node " + std::to_string(ext) +
                           " references unknown task " +
                           std::to_string(text_id));
      n.tasks.push_back(it->second);
    }
    n.obs_rows = jn.value("obs_rows", 1);
    n.step_size = require(jn, "step_size", "network.nodes[]").get<double>();
    n.noise_var = require(jn, "noise_var", "network.nodes[]").get<double>();
    const json rv = require(jn, "regressor_var", "network.nodes[]");
    if (rv.is_string()) {
      if (rv.get<std::string>() != "auto-snr")
        throw config_error(
            "network.nodes: regressor_var must be a number or \"auto-snr\"");
      n.auto_snr = true;
    } else {
      n.regressor_var = rv.get<double>();
      if (!(n.regressor_var > 0.0))
        throw config_error("network.nodes: node " + std::to_string(ext) +
                           " has regressor_var <= 0");
    }
    cfg.nodes.push_back(n);
  }
  cfg.topology.size = static_cast<int>(cfg.nodes.size());
  for (const auto& je : jedges) {
    if (!je.is_array() || je.size() != 2)
      throw config_error("network.edges: each edge must be a pair of node ids");
    auto a = node_dense.find(je.at(0).get<int>());
    auto b = node_dense.find(je.at(1).get<int>());
    if (a == node_dense.end() || b == node_dense.end())
      throw config_error("network.edges: edge references an unknown node");
    cfg.topology.edges.emplace_back(a->second, b->second);
  }

  const json exp = j.value("experiment", json::object());
  cfg.iterations = exp.value("iterations", std::uint64_t{1});
  cfg.runs = exp.value("runs", std::uint64_t{1});
  cfg.master_seed = exp.value("master_seed", std::uint64_t{1});
  if (cfg.iterations < 1) throw config_error("experiment.iterations must be >= 1");
  if (cfg.runs < 1) throw config_error("experiment.runs must be >= 1");
  if (exp.contains("variants")) {
    for (const auto& v : exp.at("variants"))
      cfg.variants.push_back(variant_from_name(v.get<std::string>()));
  } else {
    cfg.variants = {Variant::NonCooperative};
  }
  if (cfg.variants.empty())
    throw config_error("experiment.variants must not be empty");

  if (exp.contains("tau")) {
    const json jt = exp.at("tau");
    const std::string mode = jt.value("mode", "auto");
    if (mode == "auto") {
      cfg.tau.mode = TauPolicy::Mode::Auto;
      cfg.tau.factor = jt.value("factor", 0.25);
      if (!(cfg.tau.factor > 0.0))
        throw config_error("experiment.tau.factor must be > 0");
    } else if (mode == "fixed") {
      cfg.tau.mode = TauPolicy::Mode::Fixed;
      cfg.tau.value = require(jt, "value", "experiment.tau").get<double>();
      if (!(cfg.tau.value > 0.0))
        throw config_error("experiment.tau.value must be > 0");
    } else {
      throw config_error("experiment.tau.mode must be 'auto' or 'fixed'");
    }
    for (const auto& jo : jt.value("overrides", json::array())) {
      PairRef owner{node_dense.at(require(jo, "k", "tau.overrides").get<int>()),
                    task_dense.at(require(jo, "t", "tau.overrides").get<int>())};
      PairRef member{
          node_dense.at(require(jo, "l", "tau.overrides").get<int>()),
          task_dense.at(require(jo, "p", "tau.overrides").get<int>())};
      cfg.tau.overrides.emplace_back(
          owner, member, require(jo, "value", "tau.overrides").get<double>());
    }
  } else if (std::count(cfg.variants.begin(), cfg.variants.end(),
                        Variant::UDNSPE) > 0) {
    throw config_error(
        "experiment.tau is required when ud_nspe is among the variants");
  }

  if (exp.contains("snr_range_db")) {
    const json r = exp.at("snr_range_db");
    if (!r.is_array() || r.size() != 2)
      throw config_error("experiment.snr_range_db must be [lo, hi]");
    cfg.snr_lo_db = r.at(0).get<double>();
    cfg.snr_hi_db = r.at(1).get<double>();
    if (cfg.snr_lo_db > cfg.snr_hi_db)
      throw config_error("experiment.snr_range_db: lo > hi");
  }
  if (exp.contains("step_schedule")) {
    const json s = exp.at("step_schedule");
    const std::string mode = s.value("mode", "constant");
    if (mode == "decay") {
      cfg.schedule.decay = true;
      cfg.schedule.i0 = s.value("i0", 1000.0);
      if (!(cfg.schedule.i0 > 0.0))
        throw config_error("experiment.step_schedule.i0 must be > 0");
    } else if (mode != "constant") {
      throw config_error(
          "experiment.step_schedule.mode must be 'constant' or 'decay'");
    }
  }
  cfg.freeze_truth = exp.value("freeze_truth", false);
  if (exp.contains("init")) {
    cfg.init_phi = exp.at("init").value("phi", 0.0);
    cfg.init_varsigma = exp.at("init").value("varsigma", 0.0);
  }
  cfg.trace_points = exp.value("trace_points", 500);
  if (cfg.trace_points < 1)
    throw config_error("experiment.trace_points must be >= 1");
  cfg.output_dir = exp.value("output_dir", "out");

  // Surfaces invalid networks (disconnected topology, bad interest sets) at
  // load time.
  cfg.network();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

GroundTruth draw_truth(const ExperimentConfig& cfg, std::uint64_t run_eff) {
  Rng rng = Rng::from(cfg.master_seed, purpose::kTruth, run_eff);
  GroundTruth truth;
  for (const TaskSpec& t : cfg.tasks) {
    Vec q(t.dim);
    for (int m = 0; m < t.dim; ++m) q[m] = rng.uniform_open();
    truth.values.push_back(q);
  }
  return truth;
}

struct GroupLayout {
  std::vector<std::string> names;
  std::vector<std::vector<int>> members;  // pair indices per group
};

GroupLayout make_groups(const Network& net, const std::vector<int>& task_ext) {
  GroupLayout g;
  auto push = [&](const std::string& name, const std::vector<int>& m) {
    g.names.push_back(name);
    g.members.push_back(m);
  };
  for (auto grouping :
       {Grouping::NetworkWide, Grouping::Category, Grouping::PerTask}) {
    for (auto& [name, members] : msd_groups(net, grouping)) {
      std::string label = name;
      if (name.rfind("task:", 0) == 0) {
        const int dense = std::stoi(name.substr(5));
        label = "task:" + std::to_string(task_ext.at(dense));
      }
      push(label, members);
    }
  }
  return g;
}

// Per-variant accumulators for one run; merged into the aggregate only when
// the run completed without divergence.
struct RunAccum {
  std::vector<double> err_sum;                   // per state component
  std::vector<double> window_msd;                // per group
  std::vector<std::vector<double>> trace;        // [group][point]
  std::vector<double> prec, rec, fa, md;         // per point (UD)
  double w_kept_true = 0, w_kept = 0, w_oracle = 0, w_dropped_true = 0,
         w_non_oracle = 0, w_kept_false = 0;
};

}  // namespace

AggregatedResults run_experiment(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  auto base_net = cfg.network();
  const int K = base_net->num_nodes();
  const int P = base_net->num_pairs();

  const std::uint64_t window_len = std::max<std::uint64_t>(1, cfg.iterations / 10);
  const std::uint64_t window_start = cfg.iterations - window_len;
  const std::uint64_t stride = std::max<std::uint64_t>(
      1, cfg.iterations / static_cast<std::uint64_t>(cfg.trace_points));
  std::vector<std::uint64_t> trace_iters;
  for (std::uint64_t i = stride - 1; i < cfg.iterations; i += stride)
    trace_iters.push_back(i);
  if (trace_iters.empty() || trace_iters.back() != cfg.iterations - 1)
    trace_iters.push_back(cfg.iterations - 1);
  const size_t n_points = trace_iters.size();

  const GroupLayout groups = make_groups(*base_net, cfg.task_ext);
  const size_t G = groups.names.size();
  const int V = static_cast<int>(cfg.variants.size());

  AggregatedResults out;
  out.variants.resize(V);
  for (int v = 0; v < V; ++v) {
    out.variants[v].config.kind = cfg.variants[v];
    out.variants[v].mean_trace.iterations = trace_iters;
  }

  // Aggregate accumulators.
  std::vector<std::vector<std::vector<double>>> trace_sum(
      V, std::vector<std::vector<double>>(G, std::vector<double>(n_points, 0)));
  std::vector<std::vector<double>> msd_sum(V, std::vector<double>(G, 0.0));
  // Stacked pair layout, identical for every run and variant.
  std::vector<int> poff(P), pdim(P);
  int total_dim = 0;
  for (int q = 0; q < P; ++q) {
    pdim[q] = base_net->task(base_net->pairs()[q].task).dim;
    poff[q] = total_dim;
    total_dim += pdim[q];
  }
  std::vector<std::vector<double>> err_sum(V,
                                           std::vector<double>(total_dim, 0.0));
  std::vector<std::vector<double>> acc_prec(V, std::vector<double>(n_points, 0)),
      acc_rec = acc_prec, acc_fa = acc_prec, acc_md = acc_prec;
  std::vector<double> w_prec(V, 0), w_rec(V, 0), w_fa(V, 0), w_md(V, 0);
  std::vector<std::uint64_t> completed(V, 0), diverged(V, 0);
  std::vector<std::vector<Vec>> bias_sum(V);
  std::vector<double> bias_radius(V, 0.0);
  std::vector<bool> bias_all_converged(V, true);

  // Oracle keep-flag layout for the clustering metrics, per pair aligned with
  // the candidate lists (identical for every run).
  std::vector<std::vector<std::uint8_t>> oracle_flag(P);
  {
    for (int q = 0; q < P; ++q) {
      const PairRef pr = base_net->pairs()[q];
      const ClusterSet oc = base_net->oracle_cluster_set(pr.node, pr.task);
      for (const PairRef& c : base_net->neighborhood_pairs(pr.node))
        oracle_flag[q].push_back(oc.contains(c) ? 1 : 0);
    }
  }

  for (std::uint64_t run = 0; run < cfg.runs; ++run) {
    const auto t_run = std::chrono::steady_clock::now();
    const std::uint64_t run_eff = cfg.freeze_truth ? 0 : run;
    const GroundTruth truth = draw_truth(cfg, run_eff);

    std::vector<NodeSpec> nodes_run = cfg.nodes;
    for (int k = 0; k < K; ++k) {
      if (nodes_run[k].auto_snr) {
        Rng rng = Rng::from(cfg.master_seed, purpose::kCalibration, run_eff, k);
        nodes_run[k].regressor_var = calibrate_snr(
            nodes_run[k], truth, cfg.snr_lo_db, cfg.snr_hi_db, rng);
        nodes_run[k].auto_snr = false;
      }
    }
    Network net(cfg.tasks, nodes_run, cfg.topology);
    const double tau = cfg.tau.resolve(truth);

    std::vector<Simulator> sims;
    sims.reserve(V);
    for (int v = 0; v < V; ++v) {
      VariantConfig vc;
      vc.kind = cfg.variants[v];
      vc.tau = tau;
      vc.tau_overrides = cfg.tau.overrides;
      sims.emplace_back(net, vc, cfg.schedule);
      sims.back().set_initial(cfg.init_phi, cfg.init_varsigma);
    }
    // Truth stacked in the state layout.
    std::vector<double> truth_flat(total_dim);
    for (int q = 0; q < P; ++q) {
      const Vec& t = truth.of(net.pairs()[q].task);
      std::copy(t.data(), t.data() + t.size(), truth_flat.begin() + poff[q]);
    }

    // Observation buffers; one stream per node, shared by all variants.
    std::vector<std::vector<double>> U_buf(K), d_buf(K), w_node(K);
    std::vector<const double*> U_ptr(K), d_ptr(K);
    for (int k = 0; k < K; ++k) {
      const int Mk = net.node_dim(k);
      U_buf[k].assign(static_cast<size_t>(nodes_run[k].obs_rows) * Mk, 0.0);
      d_buf[k].assign(nodes_run[k].obs_rows, 0.0);
      const Vec w = stacked_truth(nodes_run[k], truth);
      w_node[k].assign(w.data(), w.data() + w.size());
      U_ptr[k] = U_buf[k].data();
      d_ptr[k] = d_buf[k].data();
    }

    std::vector<RunAccum> acc(V);
    for (int v = 0; v < V; ++v) {
      acc[v].err_sum.assign(total_dim, 0.0);
      acc[v].window_msd.assign(G, 0.0);
      acc[v].trace.assign(G, std::vector<double>(n_points, 0.0));
      if (cfg.variants[v] == Variant::UDNSPE) {
        acc[v].prec.assign(n_points, 0.0);
        acc[v].rec.assign(n_points, 0.0);
        acc[v].fa.assign(n_points, 0.0);
        acc[v].md.assign(n_points, 0.0);
      }
    }

    std::vector<double> sq(P);
    size_t point = 0;
    for (std::uint64_t i = 0; i < cfg.iterations; ++i) {
      for (int k = 0; k < K; ++k) {
        Rng rng = Rng::at_time({cfg.master_seed, run, std::uint64_t(k)}, i);
        fill_observation(nodes_run[k], w_node[k].data(), net.node_dim(k), rng,
                         U_buf[k].data(), d_buf[k].data(), nullptr);
      }
      const bool at_point = point < n_points && trace_iters[point] == i;
      const bool in_window = i >= window_start;
      for (int v = 0; v < V; ++v) {
        Simulator& sim = sims[v];
        sim.round(U_ptr.data(), d_ptr.data(), i);
        if (sim.diverged()) continue;
        if (!at_point && !in_window) continue;

        const double* phi = sim.phi_data();
        for (int q = 0; q < P; ++q) {
          const int o = poff[q];
          const int m = pdim[q];
          double s = 0.0;
          for (int c = 0; c < m; ++c) {
            const double e = truth_flat[o + c] - phi[o + c];
            s += e * e;
          }
          sq[q] = s;
        }
        if (in_window) {
          for (int c = 0; c < total_dim; ++c)
            acc[v].err_sum[c] += truth_flat[c] - phi[c];
          for (size_t g = 0; g < G; ++g) {
            double s = 0.0;
            for (int q : groups.members[g]) s += sq[q];
            acc[v].window_msd[g] += s / groups.members[g].size();
          }
        }
        if (at_point) {
          for (size_t g = 0; g < G; ++g) {
            double s = 0.0;
            for (int q : groups.members[g]) s += sq[q];
            acc[v].trace[g][point] = s / groups.members[g].size();
          }
        }
        if (cfg.variants[v] == Variant::UDNSPE && (at_point || in_window)) {
          double kept_true = 0, kept = 0, oracle_links = 0, dropped_true = 0,
                 non_oracle = 0, kept_false = 0;
          for (int q = 0; q < P; ++q) {
            const auto& keep = sim.keep_flags(q);
            const auto& of = oracle_flag[q];
            for (size_t jx = 0; jx < of.size(); ++jx) {
              oracle_links += of[jx];
              non_oracle += !of[jx];
              kept += keep[jx];
              kept_true += keep[jx] && of[jx];
              kept_false += keep[jx] && !of[jx];
              dropped_true += !keep[jx] && of[jx];
            }
          }
          if (at_point) {
            acc[v].prec[point] = kept > 0 ? kept_true / kept : 1.0;
            acc[v].rec[point] = oracle_links > 0 ? kept_true / oracle_links : 1.0;
            acc[v].fa[point] =
                oracle_links > 0 ? dropped_true / oracle_links : 0.0;
            acc[v].md[point] = non_oracle > 0 ? kept_false / non_oracle : 0.0;
          }
          if (in_window) {
            acc[v].w_kept_true += kept_true;
            acc[v].w_kept += kept;
            acc[v].w_oracle += oracle_links;
            acc[v].w_dropped_true += dropped_true;
            acc[v].w_non_oracle += non_oracle;
            acc[v].w_kept_false += kept_false;
          }
        }
      }
      if (at_point) ++point;
    }

    // Per-run record + merge into aggregates.
    RunRecord rec;
    rec.run = run;
    for (int k = 0; k < K; ++k) rec.sigma_u.push_back(nodes_run[k].regressor_var);
    rec.tau = tau;
    for (int v = 0; v < V; ++v) {
      Simulator& sim = sims[v];
      rec.stream_hash.push_back(sim.stream_hash());
      rec.diverged.push_back(sim.diverged());
      rec.diverged_at.push_back(sim.diverged() ? sim.diverged_at() : 0);
      std::map<std::string, double> steady;
      if (!sim.diverged()) {
        for (size_t g = 0; g < G; ++g)
          steady[groups.names[g]] = acc[v].window_msd[g] / window_len;
      }
      rec.steady_msd.push_back(steady);
      if (sim.diverged()) {
        ++diverged[v];
        rec.mean_error.emplace_back();
        if (cfg.runs <= 10) rec.traces.emplace_back();
        continue;
      }
      ++completed[v];
      for (int c = 0; c < total_dim; ++c) err_sum[v][c] += acc[v].err_sum[c];
      for (size_t g = 0; g < G; ++g) {
        msd_sum[v][g] += acc[v].window_msd[g] / window_len;
        for (size_t p = 0; p < n_points; ++p)
          trace_sum[v][g][p] += acc[v].trace[g][p];
      }
      if (cfg.variants[v] == Variant::UDNSPE) {
        for (size_t p = 0; p < n_points; ++p) {
          acc_prec[v][p] += acc[v].prec[p];
          acc_rec[v][p] += acc[v].rec[p];
          acc_fa[v][p] += acc[v].fa[p];
          acc_md[v][p] += acc[v].md[p];
        }
        w_prec[v] += acc[v].w_kept > 0 ? acc[v].w_kept_true / acc[v].w_kept : 1.0;
        w_rec[v] +=
            acc[v].w_oracle > 0 ? acc[v].w_kept_true / acc[v].w_oracle : 1.0;
        w_fa[v] +=
            acc[v].w_oracle > 0 ? acc[v].w_dropped_true / acc[v].w_oracle : 0.0;
        w_md[v] += acc[v].w_non_oracle > 0
                       ? acc[v].w_kept_false / acc[v].w_non_oracle
                       : 0.0;
        for (int q = 0; q < P; ++q) {
          const PairRef pr = net.pairs()[q];
          const auto& cand = net.neighborhood_pairs(pr.node);
          const auto& keep = sim.keep_flags(q);
          for (size_t jx = 0; jx < cand.size(); ++jx)
            out.variants[v].links.push_back(
                {run, pr, cand[jx], keep[jx] != 0});
        }
      }
      if (cfg.variants[v] == Variant::BlindDNSPE) {
        std::vector<CombinationWeights> ws;
        for (const PairRef& pr : net.pairs())
          ws.push_back(blind_weights(pr, net));
        const BiasPrediction pred =
            theoretical_bias(build_weight_matrix(ws, net), net, truth);
        bias_radius[v] = std::max(bias_radius[v], pred.spectral_radius);
        if (!pred.converged) {
          bias_all_converged[v] = false;
        } else if (bias_all_converged[v]) {
          if (bias_sum[v].empty())
            bias_sum[v].assign(pred.bias.begin(), pred.bias.end());
          else
            for (int q = 0; q < P; ++q) bias_sum[v][q] += pred.bias[q];
        }
      }

      // Per-run mean error and traces retained for small run counts.
      std::vector<Vec> run_err(P);
      for (int q = 0; q < P; ++q) {
        run_err[q] =
            Eigen::Map<const Vec>(acc[v].err_sum.data() + poff[q], pdim[q]) /
            static_cast<double>(window_len);
      }
      rec.mean_error.push_back(std::move(run_err));
      if (cfg.runs <= 10) {
        MsdTrace tr;
        tr.iterations = trace_iters;
        for (size_t g = 0; g < G; ++g) {
          tr.linear[groups.names[g]] = acc[v].trace[g];
          auto& db = tr.db[groups.names[g]];
          for (double x : acc[v].trace[g]) db.push_back(to_db(x));
        }
        rec.traces.push_back(std::move(tr));
      }
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_run)
            .count();
    out.runs.push_back(std::move(rec));
  }

  // Reduce.
  for (int v = 0; v < V; ++v) {
    VariantResult& vr = out.variants[v];
    vr.completed_runs = completed[v];
    vr.diverged_runs = diverged[v];
    const double n = std::max<double>(1.0, static_cast<double>(completed[v]));
    for (size_t g = 0; g < G; ++g) {
      const std::string& name = groups.names[g];
      auto& lin = vr.mean_trace.linear[name];
      auto& db = vr.mean_trace.db[name];
      for (size_t p = 0; p < n_points; ++p) {
        lin.push_back(trace_sum[v][g][p] / n);
        db.push_back(to_db(lin.back()));
      }
      vr.steady_msd_linear[name] = msd_sum[v][g] / n;
      vr.steady_msd_db[name] = to_db(vr.steady_msd_linear[name]);
    }
    for (int q = 0; q < P; ++q)
      vr.mean_error.push_back(
          Eigen::Map<const Vec>(err_sum[v].data() + poff[q], pdim[q]) /
          (n * static_cast<double>(window_len)));
    // Steady-state declaration from the trailing window of the network trace.
    {
      const auto& db = vr.mean_trace.db.at("network");
      size_t first = 0;
      while (first + 1 < n_points && trace_iters[first] < window_start) ++first;
      if (n_points >= 2 && first < n_points - 1) {
        const double d_iter = static_cast<double>(trace_iters[n_points - 1] -
                                                  trace_iters[first]);
        vr.steady_slope_db_per_100 =
            (db[n_points - 1] - db[first]) / d_iter * 100.0;
        vr.steady_declared = std::fabs(vr.steady_slope_db_per_100) < 0.01;
      }
    }
    if (cfg.variants[v] == Variant::UDNSPE) {
      vr.accuracy_trace.iterations = trace_iters;
      for (size_t p = 0; p < n_points; ++p) {
        vr.accuracy_trace.precision.push_back(acc_prec[v][p] / n);
        vr.accuracy_trace.recall.push_back(acc_rec[v][p] / n);
        vr.accuracy_trace.false_alarm_rate.push_back(acc_fa[v][p] / n);
        vr.accuracy_trace.misdetection_rate.push_back(acc_md[v][p] / n);
      }
      vr.precision = w_prec[v] / n;
      vr.recall = w_rec[v] / n;
      vr.false_alarm_rate = w_fa[v] / n;
      vr.misdetection_rate = w_md[v] / n;
    }
    if (cfg.variants[v] == Variant::BlindDNSPE) {
      vr.bias_available = true;
      vr.bias.spectral_radius = bias_radius[v];
      vr.bias.converged = bias_all_converged[v] && !bias_sum[v].empty();
      if (vr.bias.converged)
        for (int q = 0; q < P; ++q) vr.bias.bias.push_back(bias_sum[v][q] / n);
    }
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return out;
}

void ensure_writable(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw io_error("cannot create output directory '" + dir +
                   "': " + ec.message());
  const fs::path probe = fs::path(dir) / ".write_probe";
  std::ofstream f(probe);
  if (!f) throw io_error("output directory '" + dir + "' is not writable");
  f.close();
  fs::remove(probe, ec);
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string summary_json(const AggregatedResults& res,
                         const ExperimentConfig& cfg) {
  json j;
  json jc;
  jc["iterations"] = cfg.iterations;
  jc["runs"] = cfg.runs;
  jc["master_seed"] = cfg.master_seed;
  {
    json v = json::array();
    for (Variant x : cfg.variants) v.push_back(variant_name(x));
    jc["variants"] = v;
  }
  jc["tau"] = cfg.tau.mode == TauPolicy::Mode::Auto
                  ? json{{"mode", "auto"}, {"factor", cfg.tau.factor}}
                  : json{{"mode", "fixed"}, {"value", cfg.tau.value}};
  jc["snr_range_db"] = {cfg.snr_lo_db, cfg.snr_hi_db};
  jc["step_schedule"] =
      cfg.schedule.decay
          ? json{{"mode", "decay"}, {"i0", cfg.schedule.i0}}
          : json{{"mode", "constant"}};
  jc["freeze_truth"] = cfg.freeze_truth;
  jc["num_nodes"] = cfg.nodes.size();
  jc["num_tasks"] = cfg.tasks.size();
  jc["trace_points"] = cfg.trace_points;
  j["config"] = jc;

  auto net = cfg.network();
  json jv;
  for (size_t v = 0; v < res.variants.size(); ++v) {
    const VariantResult& vr = res.variants[v];
    json e;
    e["steady_msd_db"] = vr.steady_msd_db;
    e["steady_msd_linear"] = vr.steady_msd_linear;
    e["completed_runs"] = vr.completed_runs;
    e["diverged_runs"] = vr.diverged_runs;
    e["steady_state"] = {{"declared", vr.steady_declared},
                         {"slope_db_per_100_iters", vr.steady_slope_db_per_100}};
    {
      json me = json::array();
      for (const Vec& b : vr.mean_error) {
        json row = json::array();
        for (int c = 0; c < b.size(); ++c) row.push_back(b[c]);
        me.push_back(row);
      }
      e["mean_error"] = me;
    }
    if (vr.config.kind == Variant::UDNSPE) {
      e["clustering"] = {{"precision", vr.precision},
                         {"recall", vr.recall},
                         {"false_alarm_rate", vr.false_alarm_rate},
                         {"misdetection_rate", vr.misdetection_rate}};
    }
    if (vr.bias_available) {
      json bias;
      bias["converged"] = vr.bias.converged;
      bias["spectral_radius"] = vr.bias.spectral_radius;
      json pairs = json::array(), theo = json::array(), emp = json::array();
      for (int q = 0; q < net->num_pairs(); ++q) {
        const PairRef pr = net->pairs()[q];
        pairs.push_back({cfg.node_ext[pr.node], cfg.task_ext[pr.task]});
        if (vr.bias.converged) {
          json row = json::array();
          for (int c = 0; c < vr.bias.bias[q].size(); ++c)
            row.push_back(vr.bias.bias[q][c]);
          theo.push_back(row);
        }
        json row = json::array();
        for (int c = 0; c < vr.mean_error[q].size(); ++c)
          row.push_back(vr.mean_error[q][c]);
        emp.push_back(row);
      }
      bias["pairs"] = pairs;
      bias["theoretical"] = theo;
      bias["empirical"] = emp;
      e["bias"] = bias;
    }
    jv[variant_name(vr.config.kind)] = e;
  }
  j["variants"] = jv;

  json jr = json::array();
  for (const RunRecord& r : res.runs) {
    json e;
    e["run"] = r.run;
    json su;
    for (size_t k = 0; k < r.sigma_u.size(); ++k)
      su[std::to_string(cfg.node_ext[k])] = r.sigma_u[k];
    e["sigma_u"] = su;
    e["tau"] = r.tau;
    {
      json h = json::array();
      for (std::uint64_t x : r.stream_hash) {
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(x));
        h.push_back(buf);
      }
      e["stream_hash"] = h;
    }
    e["diverged"] = r.diverged;
    e["diverged_at"] = r.diverged_at;
    jr.push_back(e);
  }
  j["runs"] = jr;

  // Wall-clock data lives in its own section, excluded from the determinism
  // contract.
  json jt;
  jt["wall_seconds"] = res.wall_seconds;
  json per_run = json::array();
  for (const RunRecord& r : res.runs) per_run.push_back(r.wall_seconds);
  jt["run_wall_seconds"] = per_run;
  j["timing"] = jt;
  return j.dump(2) + "\n";
}

void emit_outputs(const AggregatedResults& res, const ExperimentConfig& cfg) {
  ensure_writable(cfg.output_dir);
  const fs::path dir(cfg.output_dir);

  {
    std::ofstream f(dir / "traces.csv");
    if (!f) throw io_error("cannot write traces.csv");
    f << "iteration,algorithm,group,msd_linear,msd_db\n";
    for (const VariantResult& vr : res.variants) {
      const std::string name = variant_name(vr.config.kind);
      for (const auto& [group, lin] : vr.mean_trace.linear) {
        const auto& db = vr.mean_trace.db.at(group);
        for (size_t p = 0; p < lin.size(); ++p)
          f << vr.mean_trace.iterations[p] << ',' << name << ',' << group
            << ',' << fmt(lin[p]) << ',' << fmt(db[p]) << '\n';
      }
    }
  }
  {
    std::ofstream f(dir / "links.csv");
    if (!f) throw io_error("cannot write links.csv");
    f << "run,node_k,task_t,node_l,task_p,kept\n";
    for (const VariantResult& vr : res.variants) {
      if (vr.config.kind != Variant::UDNSPE) continue;
      for (const LinkRecord& l : vr.links)
        f << l.run << ',' << cfg.node_ext[l.owner.node] << ','
          << cfg.task_ext[l.owner.task] << ',' << cfg.node_ext[l.member.node]
          << ',' << cfg.task_ext[l.member.task] << ',' << (l.kept ? 1 : 0)
          << '\n';
      break;  // one link table; first UD variant wins
    }
  }
  {
    std::ofstream f(dir / "summary.json");
    if (!f) throw io_error("cannot write summary.json");
    f << summary_json(res, cfg);
  }
}

}  // namespace nspe
