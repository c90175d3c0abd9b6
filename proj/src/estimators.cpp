#include "nspe/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace nspe {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::NonCooperative: return "non_cooperative";
    case Variant::OracleDNSPE: return "oracle_dnspe";
    case Variant::BlindDNSPE: return "blind_dnspe";
    case Variant::UDNSPE: return "ud_nspe";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "non_cooperative") return Variant::NonCooperative;
  if (name == "oracle_dnspe") return Variant::OracleDNSPE;
  if (name == "blind_dnspe") return Variant::BlindDNSPE;
  if (name == "ud_nspe") return Variant::UDNSPE;
  throw config_error("unknown variant '" + name + "'");
}

std::map<int, Vec> adaptation_step(const std::map<int, Vec>& estimates,
                                   const std::vector<int>& task_order,
                                   const ObservationSample& sample, double mu) {
  int Mk = 0;
  for (int t : task_order) {
    auto it = estimates.find(t);
    if (it == estimates.end())
      throw model_error("adaptation_step: estimate missing for task " +
                        std::to_string(t));
    Mk += static_cast<int>(it->second.size());
  }
  if (sample.U.cols() != Mk || sample.U.rows() != sample.d.size())
    throw model_error("adaptation_step: observation dimensions do not match "
                      "the stacked estimate");

  Vec stacked(Mk);
  int off = 0;
  for (int t : task_order) {
    const Vec& e = estimates.at(t);
    stacked.segment(off, e.size()) = e;
    off += static_cast<int>(e.size());
  }
  const Vec residual = sample.d - sample.U * stacked;

  std::map<int, Vec> out;
  off = 0;
  for (int t : task_order) {
    const Vec& e = estimates.at(t);
    const int m = static_cast<int>(e.size());
    out[t] = e + mu * (sample.U.middleCols(off, m).transpose() * residual);
    off += m;
  }
  return out;
}

Vec combination_step(const std::map<PairRef, Vec>& intermediates,
                     const CombinationWeights& weights) {
  if (weights.weights.empty())
    throw std::invalid_argument("combination_step: empty weights");
  if (std::fabs(weights.sum() - 1.0) > 1e-12)
    throw model_error("combination_step: weights do not sum to 1");
  Eigen::Index m = -1;
  Vec out;
  for (const auto& [p, w] : weights.weights) {
    auto it = intermediates.find(p);
    if (it == intermediates.end())
      throw exchange_error("combination_step: missing intermediate for pair (" +
                           std::to_string(p.node) + "," +
                           std::to_string(p.task) + ")");
    if (m < 0) {
      m = it->second.size();
      out = Vec::Zero(m);
    } else if (it->second.size() != m) {
      throw model_error("combination_step: member dimension mismatch");
    }
    out += w * it->second;
  }
  return out;
}

Hypothesis hypothesis_test(const Vec& a, const Vec& b, double tau) {
  if (a.size() != b.size())
    throw model_error("hypothesis_test: dimension mismatch");
  if (!(tau > 0.0))
    throw std::invalid_argument("hypothesis_test: tau must be positive");
  return (a - b).squaredNorm() < tau ? Hypothesis::H0 : Hypothesis::H1;
}

ClusterSet update_cluster_set(const PairRef& owner, const Vec& own,
                              const std::map<PairRef, Vec>& neighbor_estimates,
                              double tau) {
  ClusterSet set;
  set.owner = owner;
  for (const auto& [p, e] : neighbor_estimates)
    if (hypothesis_test(own, e, tau) == Hypothesis::H0) set.members.push_back(p);
  if (!set.contains(owner))
    throw exchange_error("update_cluster_set: owner estimate missing from the "
                         "neighbor map");
  return set;
}

// ---------------------------------------------------------------------------

Simulator::Simulator(const Network& net, VariantConfig variant,
                     StepSchedule sched)
    : net_(net), variant_(std::move(variant)), sched_(sched) {
  P_ = net_.num_pairs();
  off_.resize(P_);
  dim_.resize(P_);
  node_of_.resize(P_);
  const int K = net_.num_nodes();
  node_off_.resize(K);
  node_dim_.resize(K);
  first_pair_.resize(K);
  n_pairs_.resize(K);

  int off = 0, p = 0, max_L = 1;
  for (int k = 0; k < K; ++k) {
    const NodeSpec& n = net_.node(k);
    node_off_[k] = off;
    node_dim_[k] = net_.node_dim(k);
    first_pair_[k] = p;
    n_pairs_[k] = static_cast<int>(n.tasks.size());
    max_L = std::max(max_L, n.obs_rows);
    for (int t : n.tasks) {
      off_[p] = off;
      dim_[p] = net_.task(t).dim;
      node_of_[p] = k;
      off += dim_[p];
      ++p;
    }
  }
  total_ = off;
  phi_.assign(total_, 0.0);
  psi_.assign(total_, 0.0);
  res_.assign(max_L, 0.0);

  const bool needs_equal_dims = variant_.kind == Variant::BlindDNSPE ||
                                variant_.kind == Variant::UDNSPE;
  if (needs_equal_dims && !net_.all_dims_equal())
    throw config_error(variant_name(variant_.kind) +
                       " requires all task dimensions to be equal");

  if (variant_.kind == Variant::UDNSPE) {
    if (!(variant_.tau > 0.0))
      throw config_error("ud_nspe requires tau > 0");
    sig_.assign(total_, 0.0);
    cand_.resize(K);
    for (int k = 0; k < K; ++k)
      for (const PairRef& pr : net_.neighborhood_pairs(k))
        cand_[k].push_back(net_.pair_index(pr));
    keep_.resize(P_);
    keep_count_.assign(P_, 1);
    tau_.resize(P_);
    for (int q = 0; q < P_; ++q) {
      const int k = node_of_[q];
      keep_[q].assign(cand_[k].size(), 0);
      // Initial condition N(-1) = {(k,t)}.
      for (size_t j = 0; j < cand_[k].size(); ++j)
        if (cand_[k][j] == q) keep_[q][j] = 1;
      tau_[q].assign(cand_[k].size(), variant_.tau);
    }
    for (const auto& [owner, member, value] : variant_.tau_overrides) {
      const int q = net_.pair_index(owner);
      const int c = net_.pair_index(member);
      const auto& cl = cand_[node_of_[q]];
      for (size_t j = 0; j < cl.size(); ++j)
        if (cl[j] == c) tau_[q][j] = value;
    }
  } else {
    members_.resize(P_);
    weights_.resize(P_);
    for (int q = 0; q < P_; ++q) {
      const PairRef pr = net_.pairs()[q];
      CombinationWeights w;
      switch (variant_.kind) {
        case Variant::NonCooperative:
          w = uniform_weights(pr, {pr});
          break;
        case Variant::OracleDNSPE:
          w = uniform_weights(net_.oracle_cluster_set(pr.node, pr.task));
          break;
        case Variant::BlindDNSPE:
          w = blind_weights(pr, net_);
          break;
        default:
          break;
      }
      if (variant_.kind == Variant::BlindDNSPE &&
          !variant_.static_weights.empty()) {
        bool found = false;
        for (const auto& sw : variant_.static_weights)
          if (sw.owner == pr) {
            w = sw;
            found = true;
          }
        if (!found)
          throw config_error("static weights missing for a stacked pair");
        if (std::fabs(w.sum() - 1.0) > 1e-12)
          throw config_error("static weights do not sum to 1");
      }
      // Members sorted by stacked index: fixed summation order.
      std::vector<std::pair<int, double>> mem;
      for (const auto& [m, v] : w.weights)
        mem.emplace_back(net_.pair_index(m), v);
      std::sort(mem.begin(), mem.end());
      for (const auto& [mi, v] : mem) {
        if (dim_[mi] != dim_[q])
          throw model_error("combination member dimension mismatch");
        members_[q].push_back(mi);
        weights_[q].push_back(v);
      }
    }
  }
}

void Simulator::set_initial(double phi0, double varsigma0) {
  std::fill(phi_.begin(), phi_.end(), phi0);
  if (!sig_.empty()) std::fill(sig_.begin(), sig_.end(), varsigma0);
}

void Simulator::set_phi(int k, int t, const Vec& value) {
  const int q = net_.pair_index(k, t);
  if (value.size() != dim_[q]) throw model_error("set_phi: dimension mismatch");
  std::copy(value.data(), value.data() + dim_[q], phi_.begin() + off_[q]);
}

void Simulator::set_varsigma(int k, int t, const Vec& value) {
  if (sig_.empty()) throw model_error("varsigma chain exists only for ud_nspe");
  const int q = net_.pair_index(k, t);
  if (value.size() != dim_[q])
    throw model_error("set_varsigma: dimension mismatch");
  std::copy(value.data(), value.data() + dim_[q], sig_.begin() + off_[q]);
}

void Simulator::load_cluster(const ClusterSet& set) {
  if (variant_.kind != Variant::UDNSPE)
    throw model_error("clusters exist only for ud_nspe");
  const int q = net_.pair_index(set.owner);
  const int k = node_of_[q];
  std::fill(keep_[q].begin(), keep_[q].end(), 0);
  int count = 0;
  for (const PairRef& m : set.members) {
    const int c = net_.pair_index(m);
    bool found = false;
    for (size_t j = 0; j < cand_[k].size(); ++j)
      if (cand_[k][j] == c) {
        keep_[q][j] = 1;
        found = true;
        ++count;
      }
    if (!found)
      throw exchange_error("cluster member outside the neighborhood support");
  }
  keep_count_[q] = count;
}

void Simulator::adapt(const double* const* U, const double* const* d,
                      std::uint64_t i) {
  const int K = net_.num_nodes();
  for (int k = 0; k < K; ++k) {
    const NodeSpec& n = net_.node(k);
    const int L = n.obs_rows;
    const int Mk = node_dim_[k];
    const int o = node_off_[k];
    const double mu = sched_.at(n.step_size, i);
    const double* Uk = U[k];
    const double* dk = d[k];
    stream_hash_ = mix64(stream_hash_ ^
                         std::bit_cast<std::uint64_t>(dk[0]) ^ (i * 0x9e37ull));

    // phi chain: psi = phi + mu U^T (d - U phi)
    for (int r = 0; r < L; ++r) {
      const double* row = Uk + static_cast<std::ptrdiff_t>(r) * Mk;
      double acc = 0.0;
      for (int c = 0; c < Mk; ++c) acc += row[c] * phi_[o + c];
      res_[r] = dk[r] - acc;
    }
    for (int c = 0; c < Mk; ++c) psi_[o + c] = phi_[o + c];
    for (int r = 0; r < L; ++r) {
      const double* row = Uk + static_cast<std::ptrdiff_t>(r) * Mk;
      const double g = mu * res_[r];
      for (int c = 0; c < Mk; ++c) psi_[o + c] += g * row[c];
    }

    if (!sig_.empty()) {
      // varsigma chain: stand-alone LMS, never reads phi
      for (int r = 0; r < L; ++r) {
        const double* row = Uk + static_cast<std::ptrdiff_t>(r) * Mk;
        double acc = 0.0;
        for (int c = 0; c < Mk; ++c) acc += row[c] * sig_[o + c];
        res_[r] = dk[r] - acc;
      }
      for (int r = 0; r < L; ++r) {
        const double* row = Uk + static_cast<std::ptrdiff_t>(r) * Mk;
        const double g = mu * res_[r];
        for (int c = 0; c < Mk; ++c) sig_[o + c] += g * row[c];
      }
    }
  }
}

void Simulator::combine_static() {
  for (int q = 0; q < P_; ++q) {
    const int o = off_[q];
    const int m = dim_[q];
    const auto& mem = members_[q];
    const auto& wts = weights_[q];
    for (int c = 0; c < m; ++c) {
      double acc = 0.0;
      for (size_t j = 0; j < mem.size(); ++j)
        acc += wts[j] * psi_[off_[mem[j]] + c];
      phi_[o + c] = acc;
    }
  }
}

void Simulator::combine_clustered() {
  for (int q = 0; q < P_; ++q) {
    const int o = off_[q];
    const int m = dim_[q];
    const int k = node_of_[q];
    const auto& cl = cand_[k];
    const auto& keep = keep_[q];
    const double w = 1.0 / static_cast<double>(keep_count_[q]);
    for (int c = 0; c < m; ++c) {
      double acc = 0.0;
      for (size_t j = 0; j < cl.size(); ++j)
        if (keep[j]) acc += w * psi_[off_[cl[j]] + c];
      phi_[o + c] = acc;
    }
  }
}

void Simulator::refresh_clusters() {
  for (int q = 0; q < P_; ++q) {
    const int o = off_[q];
    const int m = dim_[q];
    const int k = node_of_[q];
    const auto& cl = cand_[k];
    auto& keep = keep_[q];
    int count = 0;
    for (size_t j = 0; j < cl.size(); ++j) {
      const int co = off_[cl[j]];
      double d2 = 0.0;
      for (int c = 0; c < m; ++c) {
        const double diff = sig_[o + c] - sig_[co + c];
        d2 += diff * diff;
      }
      keep[j] = d2 < tau_[q][j] ? 1 : 0;
      count += keep[j];
    }
    keep_count_[q] = count;
  }
}

void Simulator::check_divergence(std::uint64_t i) {
  for (double v : phi_) {
    if (!std::isfinite(v) || std::fabs(v) > kDivergenceLimit) {
      diverged_ = true;
      diverged_at_ = i;
      return;
    }
  }
  if (!sig_.empty()) {
    for (double v : sig_) {
      if (!std::isfinite(v) || std::fabs(v) > kDivergenceLimit) {
        diverged_ = true;
        diverged_at_ = i;
        return;
      }
    }
  }
}

void Simulator::round(const double* const* U, const double* const* d,
                      std::uint64_t i) {
  if (diverged_) return;
  adapt(U, d, i);
  if (variant_.kind == Variant::UDNSPE) {
    combine_clustered();  // over N(i-1)
    refresh_clusters();   // N(i) from the fresh varsigma
  } else {
    combine_static();
  }
  check_divergence(i);
}

Vec Simulator::phi_of(int k, int t) const {
  const int q = net_.pair_index(k, t);
  return Eigen::Map<const Vec>(phi_.data() + off_[q], dim_[q]);
}

Vec Simulator::varsigma_of(int k, int t) const {
  if (sig_.empty()) throw model_error("varsigma chain exists only for ud_nspe");
  const int q = net_.pair_index(k, t);
  return Eigen::Map<const Vec>(sig_.data() + off_[q], dim_[q]);
}

ClusterSet Simulator::cluster_set(int k, int t) const {
  if (variant_.kind != Variant::UDNSPE)
    throw model_error("clusters exist only for ud_nspe");
  const int q = net_.pair_index(k, t);
  ClusterSet set;
  set.owner = {k, t};
  const auto& cl = cand_[k];
  for (size_t j = 0; j < cl.size(); ++j)
    if (keep_[q][j]) set.members.push_back(net_.pairs()[cl[j]]);
  std::sort(set.members.begin(), set.members.end());
  return set;
}

CombinationWeights Simulator::applied_weights(int k, int t) const {
  const int q = net_.pair_index(k, t);
  CombinationWeights w;
  w.owner = {k, t};
  if (variant_.kind == Variant::UDNSPE) {
    const auto& cl = cand_[k];
    const double v = 1.0 / static_cast<double>(keep_count_[q]);
    for (size_t j = 0; j < cl.size(); ++j)
      if (keep_[q][j]) w.weights.emplace_back(net_.pairs()[cl[j]], v);
  } else {
    for (size_t j = 0; j < members_[q].size(); ++j)
      w.weights.emplace_back(net_.pairs()[members_[q][j]], weights_[q][j]);
  }
  std::sort(w.weights.begin(), w.weights.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return w;
}

void run_round(std::vector<NodeState>& states,
               const std::vector<ObservationSample>& samples,
               const VariantConfig& variant, const Network& net,
               std::uint64_t i, const StepSchedule& sched, RoundLog* log) {
  const int K = net.num_nodes();
  if (static_cast<int>(states.size()) != K ||
      static_cast<int>(samples.size()) != K)
    throw model_error("run_round: need one state and one sample per node");

  Simulator sim(net, variant, sched);
  for (int k = 0; k < K; ++k) {
    for (const auto& [t, v] : states[k].phi) sim.set_phi(k, t, v);
    if (variant.kind == Variant::UDNSPE) {
      for (const auto& [t, v] : states[k].varsigma) sim.set_varsigma(k, t, v);
      for (const auto& [t, c] : states[k].clusters) sim.load_cluster(c);
    }
  }
  std::vector<const double*> Us(K), ds(K);
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>>
      rows(K);
  for (int k = 0; k < K; ++k) {
    if (samples[k].node != k)
      throw model_error("run_round: samples must be in node order");
    rows[k] = samples[k].U;
    Us[k] = rows[k].data();
    ds[k] = samples[k].d.data();
  }
  if (log) {
    log->applied.clear();
    for (const PairRef& p : net.pairs())
      log->applied.push_back(sim.applied_weights(p.node, p.task));
  }
  sim.round(Us.data(), ds.data(), i);

  for (int k = 0; k < K; ++k) {
    NodeState& st = states[k];
    st.psi.clear();
    for (int t : net.node(k).tasks) {
      st.phi[t] = sim.phi_of(k, t);
      if (variant.kind == Variant::UDNSPE) {
        st.varsigma[t] = sim.varsigma_of(k, t);
        st.clusters[t] = sim.cluster_set(k, t);
      }
    }
  }
  if (log && variant.kind == Variant::UDNSPE) {
    log->clusters.clear();
    for (const PairRef& p : net.pairs())
      log->clusters.push_back(sim.cluster_set(p.node, p.task));
  }
}

}  // namespace nspe
