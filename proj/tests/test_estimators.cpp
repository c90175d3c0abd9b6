#include <cmath>
#include <doctest.h>

#include "nspe/data.hpp"
#include "nspe/estimators.hpp"

using namespace nspe;

namespace {

// 3-node path, global task 0 (dim 2), common task 1 on {0,1}, local task 2
// on node 2.
Network make_net() {
  std::vector<TaskSpec> tasks = {{0, 2}, {1, 2}, {2, 2}};
  std::vector<NodeSpec> nodes(3);
  for (int k = 0; k < 3; ++k) {
    nodes[k].id = k;
    nodes[k].tasks = {0};
    nodes[k].step_size = 0.05;
    nodes[k].noise_var = 1e-3;
    nodes[k].regressor_var = 1.0;
  }
  nodes[0].tasks = {0, 1};
  nodes[1].tasks = {0, 1};
  nodes[2].tasks = {0, 2};
  nodes[1].obs_rows = 2;
  return Network(tasks, nodes, {3, {{0, 1}, {1, 2}}});
}

GroundTruth make_truth() {
  GroundTruth t;
  t.values.push_back((Vec(2) << 0.3, -0.7).finished());
  t.values.push_back((Vec(2) << 1.1, 0.4).finished());
  t.values.push_back((Vec(2) << -0.2, 0.9).finished());
  return t;
}

std::vector<ObservationSample> draw_round(const Network& net,
                                          const GroundTruth& truth,
                                          std::uint64_t seed, std::uint64_t i) {
  std::vector<ObservationSample> out;
  for (int k = 0; k < net.num_nodes(); ++k)
    out.push_back(generate_observation(net.node(k), truth,
                                       {seed, 0, std::uint64_t(k)}, i));
  return out;
}

// Row-major copies of each node's U plus d pointers, in Simulator form.
struct RawRound {
  std::vector<std::vector<double>> U, d;
  std::vector<const double*> Up, dp;
  explicit RawRound(const std::vector<ObservationSample>& samples) {
    for (const ObservationSample& s : samples) {
      std::vector<double> u(s.U.rows() * s.U.cols());
      for (int r = 0; r < s.U.rows(); ++r)
        for (int c = 0; c < s.U.cols(); ++c) u[r * s.U.cols() + c] = s.U(r, c);
      U.push_back(std::move(u));
      d.emplace_back(s.d.data(), s.d.data() + s.d.size());
    }
    for (auto& u : U) Up.push_back(u.data());
    for (auto& x : d) dp.push_back(x.data());
  }
};

}  // namespace

TEST_CASE("variant names round-trip") {
  for (Variant v : {Variant::NonCooperative, Variant::OracleDNSPE,
                    Variant::BlindDNSPE, Variant::UDNSPE})
    CHECK(variant_from_name(variant_name(v)) == v);
  CHECK_THROWS_AS(variant_from_name("nope"), config_error);
}

TEST_CASE("scalar adaptation: 0 + 0.1 * 1 * (2 - 0) = 0.2") {
  ObservationSample s;
  s.node = 0;
  s.d = (Vec(1) << 2.0).finished();
  s.U = Mat::Ones(1, 1);
  std::map<int, Vec> est = {{0, Vec::Zero(1)}};
  const auto psi = adaptation_step(est, {0}, s, 0.1);
  CHECK(psi.at(0)[0] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("adaptation matches an independently composed LMS update") {
  // Two tasks of dim 2 and 3, L = 2 rows.
  std::map<int, Vec> est = {{4, (Vec(2) << 0.5, -1.0).finished()},
                            {9, (Vec(3) << 2.0, 0.0, 1.0).finished()}};
  ObservationSample s;
  s.node = 0;
  s.U = Mat(2, 5);
  s.U << 0.1, -0.2, 0.3, 0.4, -0.5, 1.0, 0.6, -0.7, 0.8, 0.9;
  s.d = (Vec(2) << 0.25, -0.75).finished();
  const double mu = 0.07;
  // Oracle: stack the estimates and apply the textbook formula in one shot.
  Vec w(5);
  w << est[4], est[9];
  const Vec stacked = w + mu * s.U.transpose() * (s.d - s.U * w);
  const auto psi = adaptation_step(est, {4, 9}, s, mu);
  CHECK((psi.at(4) - stacked.head(2)).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((psi.at(9) - stacked.tail(3)).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("combination step validates the simplex and the exchange") {
  const PairRef a{0, 0}, b{1, 0};
  std::map<PairRef, Vec> inter = {{a, (Vec(1) << 2.0).finished()},
                                  {b, (Vec(1) << 4.0).finished()}};
  CombinationWeights w{a, {{a, 0.25}, {b, 0.75}}};
  CHECK(combination_step(inter, w)[0] == doctest::Approx(3.5));
  CombinationWeights bad{a, {{a, 0.25}, {b, 0.74}}};
  CHECK_THROWS_AS(combination_step(inter, bad), model_error);
  inter.erase(b);
  CHECK_THROWS_AS(combination_step(inter, w), exchange_error);
}

TEST_CASE("hypothesis test is strict and needs a positive threshold") {
  const Vec a = (Vec(2) << 1.0, 0.0).finished();
  const Vec b = Vec::Zero(2);
  CHECK(hypothesis_test(a, b, 1.0) == Hypothesis::H1);  // distance == tau
  CHECK(hypothesis_test(a, b, 1.0 + 1e-9) == Hypothesis::H0);
  CHECK_THROWS_AS(hypothesis_test(a, b, 0.0), std::invalid_argument);
}

TEST_CASE("cluster refresh keeps the owner and applies the test") {
  const PairRef own{1, 0};
  const Vec mine = Vec::Zero(2);
  std::map<PairRef, Vec> nbr = {{own, mine},
                                {{0, 0}, (Vec(2) << 0.1, 0.0).finished()},
                                {{2, 1}, (Vec(2) << 5.0, 0.0).finished()}};
  const ClusterSet s = update_cluster_set(own, mine, nbr, 0.5);
  CHECK(s.members == std::vector<PairRef>{{0, 0}, {1, 0}});
}

TEST_CASE("reference round and flat simulator agree on every variant") {
  const Network net = make_net();
  const GroundTruth truth = make_truth();
  for (Variant kind : {Variant::NonCooperative, Variant::OracleDNSPE,
                       Variant::BlindDNSPE, Variant::UDNSPE}) {
    CAPTURE(variant_name(kind));
    VariantConfig vc;
    vc.kind = kind;
    vc.tau = 0.05;
    std::vector<NodeState> states(net.num_nodes());
    Simulator sim(net, vc);
    for (std::uint64_t i = 0; i < 40; ++i) {
      const auto samples = draw_round(net, truth, 77, i);
      RawRound raw(samples);
      run_round(states, samples, vc, net, i);
      sim.round(raw.Up.data(), raw.dp.data(), i);
      for (int k = 0; k < net.num_nodes(); ++k)
        for (int t : net.node(k).tasks) {
          const Vec a = states[k].phi.at(t);
          const Vec b = sim.phi_of(k, t);
          CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
          if (kind == Variant::UDNSPE) {
            CHECK((states[k].varsigma.at(t) - sim.varsigma_of(k, t))
                      .lpNorm<Eigen::Infinity>() == 0.0);
            CHECK(states[k].clusters.at(t).members ==
                  sim.cluster_set(k, t).members);
          }
        }
    }
  }
}

TEST_CASE("tau -> 0 reduces clustering to the non-cooperative chain") {
  const Network net = make_net();
  const GroundTruth truth = make_truth();
  VariantConfig ud{Variant::UDNSPE, 1e-300, {}, {}};
  VariantConfig nc{Variant::NonCooperative, 0.0, {}, {}};
  Simulator a(net, ud), b(net, nc);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const RawRound raw(draw_round(net, truth, 31, i));
    a.round(raw.Up.data(), raw.dp.data(), i);
    b.round(raw.Up.data(), raw.dp.data(), i);
  }
  for (int q = 0; q < net.num_pairs(); ++q)
    for (int c = 0; c < a.pair_dim(q); ++c)
      CHECK(a.phi_data()[a.pair_offset(q) + c] ==
            b.phi_data()[b.pair_offset(q) + c]);
  CHECK(a.stream_hash() == b.stream_hash());
}

TEST_CASE("tau -> infinity reduces clustering to blind fusion") {
  const Network net = make_net();
  const GroundTruth truth = make_truth();
  VariantConfig ud{Variant::UDNSPE, 1e12, {}, {}};
  Simulator a(net, ud);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const RawRound raw(draw_round(net, truth, 32, i));
    a.round(raw.Up.data(), raw.dp.data(), i);
  }
  // With an unreachable threshold every candidate link survives the test, so
  // the applied weights are exactly the blind uniform fusion weights.
  for (int q = 0; q < net.num_pairs(); ++q)
    for (std::uint8_t f : a.keep_flags(q)) CHECK(f == 1);
  for (const PairRef& pr : net.pairs()) {
    const CombinationWeights got = a.applied_weights(pr.node, pr.task);
    const CombinationWeights want = blind_weights(pr, net);
    REQUIRE(got.weights.size() == want.weights.size());
    for (size_t j = 0; j < got.weights.size(); ++j) {
      CHECK(got.weights[j].first == want.weights[j].first);
      CHECK(got.weights[j].second ==
            doctest::Approx(want.weights[j].second).epsilon(1e-15));
    }
  }
}

TEST_CASE("oracle with all-singleton sets equals non-cooperation bit-exactly") {
  // Two connected nodes with disjoint task interests: every oracle set is the
  // owner alone, yet the topology stays connected.
  std::vector<TaskSpec> tasks = {{0, 2}, {1, 2}};
  std::vector<NodeSpec> nodes(2);
  for (int k = 0; k < 2; ++k) {
    nodes[k].id = k;
    nodes[k].tasks = {k};
    nodes[k].step_size = 0.05;
    nodes[k].noise_var = 1e-3;
    nodes[k].regressor_var = 1.0;
  }
  const Network net(tasks, nodes, {2, {{0, 1}}});
  GroundTruth truth;
  truth.values.push_back((Vec(2) << 1.0, 2.0).finished());
  truth.values.push_back((Vec(2) << -1.0, 0.5).finished());
  Simulator a(net, {Variant::OracleDNSPE, 0.0, {}, {}});
  Simulator b(net, {Variant::NonCooperative, 0.0, {}, {}});
  for (std::uint64_t i = 0; i < 100; ++i) {
    const RawRound raw(draw_round(net, truth, 55, i));
    a.round(raw.Up.data(), raw.dp.data(), i);
    b.round(raw.Up.data(), raw.dp.data(), i);
  }
  for (int q = 0; q < net.num_pairs(); ++q)
    for (int c = 0; c < a.pair_dim(q); ++c)
      CHECK(a.phi_data()[a.pair_offset(q) + c] ==
            b.phi_data()[b.pair_offset(q) + c]);
}

TEST_CASE("all variants consume identical streams (shared hash)") {
  const Network net = make_net();
  const GroundTruth truth = make_truth();
  std::vector<Simulator> sims;
  sims.emplace_back(net, VariantConfig{Variant::NonCooperative, 0.0, {}, {}});
  sims.emplace_back(net, VariantConfig{Variant::OracleDNSPE, 0.0, {}, {}});
  sims.emplace_back(net, VariantConfig{Variant::BlindDNSPE, 0.0, {}, {}});
  sims.emplace_back(net, VariantConfig{Variant::UDNSPE, 0.1, {}, {}});
  for (std::uint64_t i = 0; i < 50; ++i) {
    const RawRound raw(draw_round(net, truth, 66, i));
    for (Simulator& s : sims) s.round(raw.Up.data(), raw.dp.data(), i);
  }
  for (size_t j = 1; j < sims.size(); ++j)
    CHECK(sims[j].stream_hash() == sims[0].stream_hash());
}

TEST_CASE("step sizes beyond the bound are flagged as divergent") {
  std::vector<TaskSpec> tasks = {{0, 1}, {1, 1}};
  std::vector<NodeSpec> nodes(2);
  for (int k = 0; k < 2; ++k) {
    nodes[k].id = k;
    nodes[k].tasks = {k};
    nodes[k].step_size = 2.5;
    nodes[k].noise_var = 1e-3;
    nodes[k].regressor_var = 1.0;
  }
  const Network net(tasks, nodes, {2, {{0, 1}}});
  GroundTruth truth;
  truth.values.push_back((Vec(1) << 1.0).finished());
  truth.values.push_back((Vec(1) << 0.0).finished());
  Simulator sim(net, {Variant::NonCooperative, 0.0, {}, {}});
  // |1 - mu u^2| multiplies the error each round; at mu = 2.5 the log grows
  // by ~0.02 per round on average, so crossing the 1e150 flag needs a long
  // leash.
  for (std::uint64_t i = 0; i < 100'000 && !sim.diverged(); ++i) {
    const RawRound raw(draw_round(net, truth, 99, i));
    sim.round(raw.Up.data(), raw.dp.data(), i);
  }
  CHECK(sim.diverged());
  CHECK(sim.diverged_at() > 0);
}

TEST_CASE("decaying schedule") {
  StepSchedule s{true, 100.0};
  CHECK(s.at(0.4, 0) == doctest::Approx(0.4));
  CHECK(s.at(0.4, 100) == doctest::Approx(0.2));
  StepSchedule c;
  CHECK(c.at(0.4, 1'000'000) == 0.4);
}
