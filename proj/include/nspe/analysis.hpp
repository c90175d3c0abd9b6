#pragma once

#include <map>
#include <string>
#include <vector>

#include "nspe/estimators.hpp"
#include "nspe/network.hpp"
#include "nspe/types.hpp"

namespace nspe {

// Steady-state mean-error prediction for a static weight matrix. Bias vectors
// are per stacked pair; defined only when the mean recursion is stable.
struct BiasPrediction {
  std::vector<Vec> bias;
  double spectral_radius = 0.0;
  bool converged = false;
};

// N x N row-stochastic matrix of combination coefficients over the stacked
// pair index; row (k,t), column (l,p).
Mat build_weight_matrix(const std::vector<CombinationWeights>& weights,
                        const Network& net);

// Mean steady-state error of the diffusion recursion under the given static
// weights, from the closed-form fixed point of the mean recursion. Requires
// equal task dimensions and isotropic regressor covariances sigma^2_u I.
BiasPrediction theoretical_bias(const Mat& C, const Network& net,
                                const GroundTruth& truth);

// 2 / lambda_max of the node's regressor covariance blocks; +inf when the
// regressor variance is zero.
double step_size_bound(const NodeSpec& node);

inline constexpr double kDbFloor = -120.0;
double to_db(double linear);  // floors at kDbFloor for linear <= 1e-12

enum class Grouping { NetworkWide, Category, PerTask };

struct MsdTrace {
  std::vector<std::uint64_t> iterations;
  // group name -> series; names: "network", "global", "common", "local",
  // "task:<id>"
  std::map<std::string, std::vector<double>> linear;
  std::map<std::string, std::vector<double>> db;
};

// Group -> stacked pair indices for the requested grouping.
std::map<std::string, std::vector<int>> msd_groups(const Network& net,
                                                   Grouping grouping);

// history[j] holds the per-pair estimates at iterations[j].
MsdTrace msd(const std::vector<std::vector<Vec>>& history,
             const std::vector<std::uint64_t>& iterations,
             const GroundTruth& truth, const Network& net, Grouping grouping);

struct ClusterAccuracy {
  std::vector<std::uint64_t> iterations;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> false_alarm_rate;   // oracle links dropped
  std::vector<double> misdetection_rate;  // non-oracle links kept
};

// history[j] holds the per-pair cluster sets at iterations[j].
ClusterAccuracy cluster_accuracy(
    const std::vector<std::vector<ClusterSet>>& history,
    const std::vector<std::uint64_t>& iterations, const Network& net);

// Sample average over the window of sum_k ||d_k - U_k w_k||^2 at the given
// per-pair estimates.
double empirical_cost(const std::vector<Vec>& estimates,
                      const std::vector<std::vector<ObservationSample>>& window,
                      const Network& net);

}  // namespace nspe
