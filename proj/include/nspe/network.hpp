#pragma once

#include <string>
#include <vector>

#include "nspe/types.hpp"

namespace nspe {

enum class TaskKind { Global, Common, Local };

struct ValidationReport {
  bool sizes_consistent = true;
  bool symmetric = true;
  bool self_contained = true;  // no node listed as its own proper neighbor
  bool connected = true;
  std::vector<std::vector<int>> components;  // nonempty iff disconnected
  std::vector<std::string> messages;
  bool pass() const {
    return sizes_consistent && symmetric && self_contained && connected;
  }
  std::string to_string() const;
};

ValidationReport validate_topology(const Topology& topology,
                                   const std::vector<NodeSpec>& nodes);

// Validated, immutable view of tasks + nodes + topology with the stacked
// (node, task) pair index used throughout the estimators and the analyzer.
class Network {
 public:
  Network(std::vector<TaskSpec> tasks, std::vector<NodeSpec> nodes,
          Topology topology);

  int num_tasks() const { return static_cast<int>(tasks_.size()); }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_pairs() const { return static_cast<int>(pairs_.size()); }

  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const Topology& topology() const { return topology_; }
  const TaskSpec& task(int t) const { return tasks_.at(t); }
  const NodeSpec& node(int k) const { return nodes_.at(k); }

  // Neighborhood of k including k itself, sorted.
  const std::vector<int>& neighbors(int k) const { return neighbors_.at(k); }

  // C_t: nodes interested in task t, sorted.
  const std::vector<int>& interest_group(int t) const;

  TaskKind task_kind(int t) const;

  // M_k
  int node_dim(int k) const { return node_dim_.at(k); }

  // Stacked pair ordering: nodes in id order, tasks in interest-set order.
  const std::vector<PairRef>& pairs() const { return pairs_; }
  int pair_index(int k, int t) const;
  int pair_index(const PairRef& p) const { return pair_index(p.node, p.task); }

  // All (l, p) pairs with l in N_k, sorted by stacked index; the support of
  // blind weights and the candidate set of the clustering test.
  const std::vector<PairRef>& neighborhood_pairs(int k) const {
    return nbr_pairs_.at(k);
  }

  bool all_dims_equal() const { return all_dims_equal_; }

  ClusterSet oracle_cluster_set(int k, int t) const;

 private:
  std::vector<TaskSpec> tasks_;
  std::vector<NodeSpec> nodes_;
  Topology topology_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> interest_;
  std::vector<int> node_dim_;
  std::vector<PairRef> pairs_;
  std::vector<std::vector<int>> pair_of_;  // [node][slot] -> stacked index
  std::vector<std::vector<PairRef>> nbr_pairs_;
  bool all_dims_equal_ = true;
};

CombinationWeights uniform_weights(const PairRef& owner,
                                   const std::vector<PairRef>& members);
CombinationWeights uniform_weights(const ClusterSet& set);

// Strictly positive uniform weight on every neighborhood pair: the fusion
// rule used when task assignments are unknown and no clustering is run.
CombinationWeights blind_weights(const PairRef& owner, const Network& net);

}  // namespace nspe
