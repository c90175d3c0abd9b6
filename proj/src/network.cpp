#include "nspe/network.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace nspe {

bool ClusterSet::contains(const PairRef& p) const {
  return std::binary_search(members.begin(), members.end(), p);
}

double CombinationWeights::sum() const {
  double s = 0.0;
  for (const auto& [p, w] : weights) s += w;
  return s;
}

const Vec& GroundTruth::of(int task) const {
  if (task < 0 || task >= static_cast<int>(values.size()))
    throw std::out_of_range("unknown task id " + std::to_string(task));
  return values[task];
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  os << (pass() ? "pass" : "fail");
  for (const auto& m : messages) os << "\n  " << m;
  return os.str();
}

ValidationReport validate_topology(const Topology& topology,
                                   const std::vector<NodeSpec>& nodes) {
  ValidationReport rep;
  const int K = topology.size;
  if (K != static_cast<int>(nodes.size())) {
    rep.sizes_consistent = false;
    rep.messages.push_back("topology size " + std::to_string(K) +
                           " does not match node count " +
                           std::to_string(nodes.size()));
    return rep;
  }
  std::vector<std::vector<int>> adj(K);
  for (const auto& [a, b] : topology.edges) {
    if (a < 0 || a >= K || b < 0 || b >= K) {
      rep.sizes_consistent = false;
      rep.messages.push_back("edge (" + std::to_string(a) + "," +
                             std::to_string(b) + ") outside node range");
      return rep;
    }
    if (a == b) {
      rep.self_contained = false;
      rep.messages.push_back("node " + std::to_string(a) +
                             " listed as its own neighbor; self membership "
                             "is implied and must not appear in the edge list");
      continue;
    }
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  // Edge lists are undirected by construction, so symmetry holds; report it.
  rep.symmetric = true;

  std::vector<int> comp(K, -1);
  int n_comp = 0;
  for (int s = 0; s < K; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = n_comp;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (comp[v] < 0) {
          comp[v] = n_comp;
          stack.push_back(v);
        }
    }
    ++n_comp;
  }
  if (n_comp > 1) {
    rep.connected = false;
    rep.components.resize(n_comp);
    for (int k = 0; k < K; ++k) rep.components[comp[k]].push_back(k);
    std::ostringstream os;
    os << "graph is disconnected; components:";
    for (const auto& c : rep.components) {
      os << " {";
      for (size_t j = 0; j < c.size(); ++j) os << (j ? "," : "") << c[j];
      os << "}";
    }
    rep.messages.push_back(os.str());
  }
  return rep;
}

Network::Network(std::vector<TaskSpec> tasks, std::vector<NodeSpec> nodes,
                 Topology topology)
    : tasks_(std::move(tasks)),
      nodes_(std::move(nodes)),
      topology_(std::move(topology)) {
  const int T = static_cast<int>(tasks_.size());
  const int K = static_cast<int>(nodes_.size());
  if (T == 0) throw config_error("task universe is empty");
  if (K == 0) throw config_error("node list is empty");

  for (int t = 0; t < T; ++t) {
    if (tasks_[t].id != t)
      throw config_error("task ids must be dense 0-based indices");
    if (tasks_[t].dim < 1)
      throw config_error("task " + std::to_string(t) + " has dim < 1");
    if (tasks_[t].dim != tasks_[0].dim) all_dims_equal_ = false;
  }

  interest_.assign(T, {});
  node_dim_.assign(K, 0);
  pair_of_.assign(K, {});
  for (int k = 0; k < K; ++k) {
    const NodeSpec& n = nodes_[k];
    if (n.id != k) throw config_error("node ids must be dense 0-based indices");
    if (n.tasks.empty())
      throw config_error("node " + std::to_string(k) +
                         " has an empty interest set");
    std::set<int> seen;
    for (int t : n.tasks) {
      if (t < 0 || t >= T)
        throw config_error("node " + std::to_string(k) +
                           " references unknown task " + std::to_string(t));
      if (!seen.insert(t).second)
        throw config_error("node " + std::to_string(k) +
                           " lists task " + std::to_string(t) + " twice");
      interest_[t].push_back(k);
      node_dim_[k] += tasks_[t].dim;
      pair_of_[k].push_back(static_cast<int>(pairs_.size()));
      pairs_.push_back({k, t});
    }
    if (n.obs_rows < 1)
      throw config_error("node " + std::to_string(k) + " has obs_rows < 1");
    if (n.step_size <= 0)
      throw config_error("node " + std::to_string(k) + " has step_size <= 0");
    if (n.noise_var <= 0)
      throw config_error("node " + std::to_string(k) + " has noise_var <= 0");
  }
  for (int t = 0; t < T; ++t)
    if (interest_[t].empty())
      throw config_error("task " + std::to_string(t) +
                         " is in no node's interest set");

  ValidationReport rep = validate_topology(topology_, nodes_);
  if (!rep.pass()) throw config_error("invalid topology: " + rep.to_string());

  neighbors_.assign(K, {});
  for (int k = 0; k < K; ++k) neighbors_[k].push_back(k);
  for (const auto& [a, b] : topology_.edges) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& nb : neighbors_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  nbr_pairs_.assign(K, {});
  for (int k = 0; k < K; ++k) {
    for (int l : neighbors_[k])
      for (int t : nodes_[l].tasks) nbr_pairs_[k].push_back({l, t});
    std::sort(nbr_pairs_[k].begin(), nbr_pairs_[k].end(),
              [this](const PairRef& a, const PairRef& b) {
                return pair_index(a) < pair_index(b);
              });
  }
}

const std::vector<int>& Network::interest_group(int t) const {
  if (t < 0 || t >= num_tasks())
    throw std::out_of_range("unknown task id " + std::to_string(t));
  return interest_[t];
}

TaskKind Network::task_kind(int t) const {
  const auto& c = interest_group(t);
  if (static_cast<int>(c.size()) == num_nodes()) return TaskKind::Global;
  if (c.size() == 1) return TaskKind::Local;
  return TaskKind::Common;
}

int Network::pair_index(int k, int t) const {
  const auto& order = nodes_.at(k).tasks;
  for (size_t s = 0; s < order.size(); ++s)
    if (order[s] == t) return pair_of_[k][s];
  throw std::out_of_range("task " + std::to_string(t) +
                          " is not in the interest set of node " +
                          std::to_string(k));
}

ClusterSet Network::oracle_cluster_set(int k, int t) const {
  pair_index(k, t);  // throws if t is not of interest to k
  ClusterSet set;
  set.owner = {k, t};
  for (int l : neighbors(k)) {
    const auto& c = interest_group(t);
    if (std::binary_search(c.begin(), c.end(), l)) set.members.push_back({l, t});
  }
  std::sort(set.members.begin(), set.members.end());
  return set;
}

CombinationWeights uniform_weights(const PairRef& owner,
                                   const std::vector<PairRef>& members) {
  if (members.empty())
    throw std::invalid_argument("uniform_weights: empty member set");
  CombinationWeights w;
  w.owner = owner;
  const double v = 1.0 / static_cast<double>(members.size());
  for (const auto& m : members) w.weights.emplace_back(m, v);
  std::sort(w.weights.begin(), w.weights.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return w;
}

CombinationWeights uniform_weights(const ClusterSet& set) {
  return uniform_weights(set.owner, set.members);
}

CombinationWeights blind_weights(const PairRef& owner, const Network& net) {
  net.pair_index(owner);  // validates t in T_k
  return uniform_weights(owner, net.neighborhood_pairs(owner.node));
}

}  // namespace nspe
