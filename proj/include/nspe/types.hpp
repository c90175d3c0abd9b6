#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nspe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct model_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct exchange_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct calibration_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One estimation task t: a parameter vector of dimension dim shared by every
// node interested in it. Ids are dense 0-based indices internally; external
// labels live in the config layer.
struct TaskSpec {
  int id = 0;
  int dim = 0;
};

struct NodeSpec {
  int id = 0;
  std::vector<int> tasks;      // ordered interest set, task ids
  int obs_rows = 1;            // rows of each observation (L_k)
  double step_size = 0.0;      // mu_k
  double noise_var = 0.0;      // sigma^2_v
  double regressor_var = 0.0;  // sigma^2_u; ignored when auto_snr
  bool auto_snr = false;       // calibrate sigma^2_u from the SNR range
};

// Undirected link structure. Edge lists name proper neighbors only; self
// membership of each neighborhood is implied.
struct Topology {
  int size = 0;
  std::vector<std::pair<int, int>> edges;
};

struct PairRef {
  int node = 0;
  int task = 0;
  friend bool operator==(const PairRef&, const PairRef&) = default;
  friend auto operator<=>(const PairRef&, const PairRef&) = default;
};

// Per-task cooperation set of a node: the (neighbor, task) pairs whose
// intermediate estimates feed the owner's combination step.
struct ClusterSet {
  PairRef owner;
  std::vector<PairRef> members;  // sorted
  bool contains(const PairRef& p) const;
};

struct CombinationWeights {
  PairRef owner;
  std::vector<std::pair<PairRef, double>> weights;  // sorted by pair
  double sum() const;
};

// True parameter vectors q_t, indexed by task id.
struct GroundTruth {
  std::vector<Vec> values;
  const Vec& of(int task) const;
};

}  // namespace nspe
