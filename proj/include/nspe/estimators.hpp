#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "nspe/data.hpp"
#include "nspe/network.hpp"
#include "nspe/types.hpp"

namespace nspe {

enum class Variant { NonCooperative, OracleDNSPE, BlindDNSPE, UDNSPE };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Optional decaying schedule mu_k(i) = mu_k * i0 / (i0 + i); constant when
// decay is off.
struct StepSchedule {
  bool decay = false;
  double i0 = 1000.0;
  double at(double mu, std::uint64_t i) const {
    return decay ? mu * i0 / (i0 + static_cast<double>(i)) : mu;
  }
};

struct VariantConfig {
  Variant kind = Variant::NonCooperative;
  // UDNSPE: global squared-distance threshold, with optional per-link
  // overrides keyed by ((k,t),(l,p)).
  double tau = 0.0;
  std::vector<std::tuple<PairRef, PairRef, double>> tau_overrides;
  // BlindDNSPE: optional static weights replacing the uniform default.
  std::vector<CombinationWeights> static_weights;
};

// Per-node estimator state in map form; the reference path for tests and
// bindings. phi: diffusion estimates; varsigma: auxiliary stand-alone
// estimates (UD-NSPE); psi: intermediates within a round; clusters: dynamic
// cooperation sets (UD-NSPE).
struct NodeState {
  std::map<int, Vec> phi;
  std::map<int, Vec> varsigma;
  std::map<int, Vec> psi;
  std::map<int, ClusterSet> clusters;
};

enum class Hypothesis { H0, H1 };

// LMS correction shared by the phi and varsigma chains: one residual per
// node, applied blockwise per task.
std::map<int, Vec> adaptation_step(const std::map<int, Vec>& estimates,
                                   const std::vector<int>& task_order,
                                   const ObservationSample& sample, double mu);

Vec combination_step(const std::map<PairRef, Vec>& intermediates,
                     const CombinationWeights& weights);

// H0 (same task) iff ||a - b||^2 < tau, strict.
Hypothesis hypothesis_test(const Vec& a, const Vec& b, double tau);

ClusterSet update_cluster_set(const PairRef& owner, const Vec& own,
                              const std::map<PairRef, Vec>& neighbor_estimates,
                              double tau);

struct RoundLog {
  std::vector<CombinationWeights> applied;  // per stacked pair
  std::vector<ClusterSet> clusters;         // UD-NSPE: the updated sets
};

// One synchronous round over all nodes: adapt-all, exchange, combine-all
// (plus the varsigma chain and cluster refresh for UD-NSPE).
void run_round(std::vector<NodeState>& states,
               const std::vector<ObservationSample>& samples,
               const VariantConfig& variant, const Network& net,
               std::uint64_t i, const StepSchedule& sched = {},
               RoundLog* log = nullptr);

// Flat-state implementation of the same round semantics, built once per run
// and stepped once per instant. Estimates live in contiguous arrays indexed
// by the network's stacked pair layout.
class Simulator {
 public:
  static constexpr double kDivergenceLimit = 1e150;

  Simulator(const Network& net, VariantConfig variant, StepSchedule sched = {});

  // Constant initial value for every phi / varsigma entry (default 0).
  void set_initial(double phi0, double varsigma0 = 0.0);
  void set_phi(int k, int t, const Vec& value);
  void set_varsigma(int k, int t, const Vec& value);
  void load_cluster(const ClusterSet& set);

  // U[k]: obs_rows x M_k row major, d[k]: obs_rows, one block per node.
  void round(const double* const* U, const double* const* d, std::uint64_t i);

  bool diverged() const { return diverged_; }
  std::uint64_t diverged_at() const { return diverged_at_; }

  const Network& net() const { return net_; }
  const VariantConfig& variant() const { return variant_; }

  int pair_offset(int p) const { return off_[p]; }
  int pair_dim(int p) const { return dim_[p]; }
  const double* phi_data() const { return phi_.data(); }
  const double* varsigma_data() const { return sig_.data(); }
  Vec phi_of(int k, int t) const;
  Vec varsigma_of(int k, int t) const;

  // Candidate links of the clustering test, shared by every task of a node.
  const std::vector<int>& candidates(int k) const { return cand_[k]; }
  // Current keep flags (aligned with candidates(node_of(pair))); UD-NSPE only.
  const std::vector<std::uint8_t>& keep_flags(int pair) const {
    return keep_[pair];
  }
  ClusterSet cluster_set(int k, int t) const;
  CombinationWeights applied_weights(int k, int t) const;

  // Digest of the observation stream consumed so far (variant-fairness check).
  std::uint64_t stream_hash() const { return stream_hash_; }

 private:
  void adapt(const double* const* U, const double* const* d, std::uint64_t i);
  void combine_static();
  void combine_clustered();
  void refresh_clusters();
  void check_divergence(std::uint64_t i);

  const Network& net_;
  VariantConfig variant_;
  StepSchedule sched_;

  int P_ = 0;
  int total_ = 0;
  std::vector<int> off_, dim_, node_of_;
  std::vector<int> node_off_, node_dim_, first_pair_, n_pairs_;
  std::vector<double> phi_, psi_, sig_;
  std::vector<double> res_;  // residual scratch, max L_k

  // Static combination support (NonCooperative / Oracle / Blind).
  std::vector<std::vector<int>> members_;
  std::vector<std::vector<double>> weights_;

  // UD-NSPE clustering state.
  std::vector<std::vector<int>> cand_;            // per node
  std::vector<std::vector<std::uint8_t>> keep_;   // per pair, N(i-1) then N(i)
  std::vector<int> keep_count_;
  std::vector<std::vector<double>> tau_;          // per pair, per candidate

  bool diverged_ = false;
  std::uint64_t diverged_at_ = 0;
  std::uint64_t stream_hash_ = 0x243f6a8885a308d3ull;
};

}  // namespace nspe
