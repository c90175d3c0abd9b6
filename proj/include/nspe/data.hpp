#pragma once

#include "nspe/rng.hpp"
#include "nspe/types.hpp"

namespace nspe {

// One realization (d, U) of the linear observation model at a node. The
// column blocks of U follow the node's interest-set order. The drawn noise is
// recorded so the identity d = U w + v can be checked in tests.
struct ObservationSample {
  int node = 0;
  Vec d;
  Mat U;
  Vec noise;
};

// Concatenation of the node's true task vectors in interest-set order (w_k).
Vec stacked_truth(const NodeSpec& node, const GroundTruth& truth);

// Fills U (obs_rows x Mk, row major) and d = U w + v with iid Gaussian
// entries drawn from rng; returns through out params. Hot-path primitive
// shared by generate_observation and the simulator.
void fill_observation(const NodeSpec& node, const double* w, int Mk, Rng& rng,
                      double* U, double* d, double* noise);

ObservationSample generate_observation(const NodeSpec& node,
                                       const GroundTruth& truth,
                                       const StreamSeed& stream,
                                       std::uint64_t i);

// 10 log10(sigma^2_u ||w_k||^2 / sigma^2_v): expected signal power over noise
// power under the isotropic regressor model.
double snr_of(const NodeSpec& node, const GroundTruth& truth);

// Draws sigma^2_u uniform in (0,1) until the SNR lands in [lo_db, hi_db].
// Throws calibration_error (reporting the achievable range) after
// max_attempts rejections.
double calibrate_snr(const NodeSpec& node, const GroundTruth& truth,
                     double lo_db, double hi_db, Rng& rng,
                     int max_attempts = 10000);

}  // namespace nspe
