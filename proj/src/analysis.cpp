#include "nspe/analysis.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace nspe {

Mat build_weight_matrix(const std::vector<CombinationWeights>& weights,
                        const Network& net) {
  const int N = net.num_pairs();
  if (static_cast<int>(weights.size()) != N)
    throw std::out_of_range(
        "build_weight_matrix: need weights for every stacked pair");
  Mat C = Mat::Zero(N, N);
  std::vector<bool> seen(N, false);
  for (const auto& w : weights) {
    const int row = net.pair_index(w.owner);
    if (seen[row])
      throw std::out_of_range("build_weight_matrix: duplicate owner pair");
    seen[row] = true;
    for (const auto& [p, v] : w.weights) C(row, net.pair_index(p)) = v;
    if (std::fabs(C.row(row).sum() - 1.0) > 1e-12)
      throw model_error("build_weight_matrix: row for pair (" +
                        std::to_string(w.owner.node) + "," +
                        std::to_string(w.owner.task) + ") does not sum to 1");
  }
  return C;
}

BiasPrediction theoretical_bias(const Mat& C, const Network& net,
                                const GroundTruth& truth) {
  if (!net.all_dims_equal())
    throw model_error("theoretical_bias requires equal task dimensions");
  const int N = net.num_pairs();
  if (C.rows() != N || C.cols() != N)
    throw model_error("theoretical_bias: C must be N x N over stacked pairs");
  const int M = net.task(0).dim;

  // With isotropic per-task covariance blocks, M D is diagonal over stacked
  // pairs with entry mu_k sigma^2_{u_k} repeated M times, so the Kronecker
  // expansion C kron I_M acts blockwise and the system reduces to N x N
  // acting on M columns.
  // R_{U_k} = E[U^T U] = L_k sigma^2_u I for iid entries.
  Vec md(N);
  for (int q = 0; q < N; ++q) {
    const NodeSpec& n = net.node(net.pairs()[q].node);
    md[q] = n.step_size * n.obs_rows * n.regressor_var;
  }
  Mat T = C * (Vec::Ones(N) - md).asDiagonal();  // mean-error transition

  BiasPrediction out;
  Eigen::EigenSolver<Mat> es(T, /*computeEigenvectors=*/false);
  out.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(out.spectral_radius < 1.0)) return out;

  Mat Q(N, M);
  for (int q = 0; q < N; ++q) Q.row(q) = truth.of(net.pairs()[q].task);
  const Mat rhs = (Mat::Identity(N, N) - C) * Q;
  const Mat A = Mat::Identity(N, N) - T;
  Eigen::FullPivLU<Mat> lu(A);
  if (!lu.isInvertible()) return out;
  const Mat B = lu.solve(rhs);
  out.converged = true;
  out.bias.reserve(N);
  for (int q = 0; q < N; ++q) out.bias.push_back(B.row(q).transpose());
  return out;
}

double step_size_bound(const NodeSpec& node) {
  if (node.regressor_var <= 0.0)
    return std::numeric_limits<double>::infinity();
  return 2.0 / (node.obs_rows * node.regressor_var);
}

double to_db(double linear) {
  if (linear <= 1e-12) return kDbFloor;
  return 10.0 * std::log10(linear);
}

std::map<std::string, std::vector<int>> msd_groups(const Network& net,
                                                   Grouping grouping) {
  std::map<std::string, std::vector<int>> groups;
  const auto& pairs = net.pairs();
  for (int q = 0; q < net.num_pairs(); ++q) {
    switch (grouping) {
      case Grouping::NetworkWide:
        groups["network"].push_back(q);
        break;
      case Grouping::Category: {
        switch (net.task_kind(pairs[q].task)) {
          case TaskKind::Global: groups["global"].push_back(q); break;
          case TaskKind::Common: groups["common"].push_back(q); break;
          case TaskKind::Local: groups["local"].push_back(q); break;
        }
        break;
      }
      case Grouping::PerTask:
        groups["task:" + std::to_string(pairs[q].task)].push_back(q);
        break;
    }
  }
  return groups;
}

MsdTrace msd(const std::vector<std::vector<Vec>>& history,
             const std::vector<std::uint64_t>& iterations,
             const GroundTruth& truth, const Network& net, Grouping grouping) {
  if (history.size() != iterations.size())
    throw std::invalid_argument("msd: history/iteration length mismatch");
  auto groups = msd_groups(net, grouping);
  if (groups.empty()) throw std::invalid_argument("msd: empty grouping");
  MsdTrace trace;
  trace.iterations = iterations;
  for (const auto& [name, members] : groups) {
    if (members.empty()) throw std::invalid_argument("msd: empty group");
    auto& lin = trace.linear[name];
    auto& db = trace.db[name];
    for (const auto& snapshot : history) {
      if (static_cast<int>(snapshot.size()) != net.num_pairs())
        throw std::invalid_argument("msd: snapshot size mismatch");
      double acc = 0.0;
      for (int q : members)
        acc += (truth.of(net.pairs()[q].task) - snapshot[q]).squaredNorm();
      acc /= static_cast<double>(members.size());
      lin.push_back(acc);
      db.push_back(to_db(acc));
    }
  }
  return trace;
}

ClusterAccuracy cluster_accuracy(
    const std::vector<std::vector<ClusterSet>>& history,
    const std::vector<std::uint64_t>& iterations, const Network& net) {
  if (history.size() != iterations.size())
    throw std::invalid_argument(
        "cluster_accuracy: history/iteration length mismatch");
  std::vector<ClusterSet> oracle;
  for (const PairRef& p : net.pairs())
    oracle.push_back(net.oracle_cluster_set(p.node, p.task));

  ClusterAccuracy acc;
  acc.iterations = iterations;
  for (const auto& snapshot : history) {
    if (snapshot.size() != oracle.size())
      throw std::invalid_argument("cluster_accuracy: snapshot size mismatch");
    double kept_true = 0, kept = 0, oracle_links = 0, dropped_true = 0;
    double non_oracle = 0, kept_false = 0;
    for (size_t q = 0; q < oracle.size(); ++q) {
      const auto& cand = net.neighborhood_pairs(net.pairs()[q].node);
      for (const PairRef& c : cand) {
        const bool is_oracle = oracle[q].contains(c);
        const bool is_kept = snapshot[q].contains(c);
        oracle_links += is_oracle;
        non_oracle += !is_oracle;
        kept += is_kept;
        kept_true += is_kept && is_oracle;
        kept_false += is_kept && !is_oracle;
        dropped_true += !is_kept && is_oracle;
      }
    }
    acc.precision.push_back(kept > 0 ? kept_true / kept : 1.0);
    acc.recall.push_back(oracle_links > 0 ? kept_true / oracle_links : 1.0);
    acc.false_alarm_rate.push_back(
        oracle_links > 0 ? dropped_true / oracle_links : 0.0);
    acc.misdetection_rate.push_back(
        non_oracle > 0 ? kept_false / non_oracle : 0.0);
  }
  return acc;
}

double empirical_cost(const std::vector<Vec>& estimates,
                      const std::vector<std::vector<ObservationSample>>& window,
                      const Network& net) {
  if (window.empty()) throw std::invalid_argument("empirical_cost: empty window");
  if (static_cast<int>(estimates.size()) != net.num_pairs())
    throw std::invalid_argument("empirical_cost: estimate count mismatch");
  double acc = 0.0;
  for (const auto& samples : window) {
    for (int k = 0; k < net.num_nodes(); ++k) {
      const ObservationSample& s = samples.at(k);
      Vec stacked(net.node_dim(k));
      int off = 0;
      for (int t : net.node(k).tasks) {
        const int q = net.pair_index(k, t);
        stacked.segment(off, estimates[q].size()) = estimates[q];
        off += static_cast<int>(estimates[q].size());
      }
      acc += (s.d - s.U * stacked).squaredNorm();
    }
  }
  return acc / static_cast<double>(window.size());
}

}  // namespace nspe
