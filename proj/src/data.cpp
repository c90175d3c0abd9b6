#include "nspe/data.hpp"

#include <cmath>
#include <string>

namespace nspe {

Vec stacked_truth(const NodeSpec& node, const GroundTruth& truth) {
  int Mk = 0;
  for (int t : node.tasks) Mk += static_cast<int>(truth.of(t).size());
  Vec w(Mk);
  int off = 0;
  for (int t : node.tasks) {
    const Vec& q = truth.of(t);
    w.segment(off, q.size()) = q;
    off += static_cast<int>(q.size());
  }
  return w;
}

void fill_observation(const NodeSpec& node, const double* w, int Mk, Rng& rng,
                      double* U, double* d, double* noise) {
  const int L = node.obs_rows;
  const double su = std::sqrt(node.regressor_var);
  const double sv = std::sqrt(node.noise_var);
  for (int r = 0; r < L; ++r) {
    double* row = U + static_cast<std::ptrdiff_t>(r) * Mk;
    double acc = 0.0;
    for (int c = 0; c < Mk; ++c) {
      row[c] = su * rng.gaussian();
      acc += row[c] * w[c];
    }
    const double v = sv * rng.gaussian();
    d[r] = acc + v;
    if (noise) noise[r] = v;
  }
}

ObservationSample generate_observation(const NodeSpec& node,
                                       const GroundTruth& truth,
                                       const StreamSeed& stream,
                                       std::uint64_t i) {
  const Vec w = stacked_truth(node, truth);
  const int Mk = static_cast<int>(w.size());
  ObservationSample s;
  s.node = node.id;
  s.d.resize(node.obs_rows);
  s.noise.resize(node.obs_rows);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> U(
      node.obs_rows, Mk);
  Rng rng = Rng::at_time(stream, i);
  fill_observation(node, w.data(), Mk, rng, U.data(), s.d.data(),
                   s.noise.data());
  s.U = U;
  return s;
}

double snr_of(const NodeSpec& node, const GroundTruth& truth) {
  if (node.noise_var <= 0.0)
    throw calibration_error("node " + std::to_string(node.id) +
                            ": SNR undefined for zero noise variance");
  const Vec w = stacked_truth(node, truth);
  return 10.0 *
         std::log10(node.regressor_var * w.squaredNorm() / node.noise_var);
}

double calibrate_snr(const NodeSpec& node, const GroundTruth& truth,
                     double lo_db, double hi_db, Rng& rng, int max_attempts) {
  NodeSpec probe = node;
  for (int a = 0; a < max_attempts; ++a) {
    probe.regressor_var = rng.uniform_open();
    const double snr = snr_of(probe, truth);
    if (snr >= lo_db && snr <= hi_db) return probe.regressor_var;
  }
  const Vec w = stacked_truth(node, truth);
  const double top = 10.0 * std::log10(w.squaredNorm() / node.noise_var);
  throw calibration_error(
      "node " + std::to_string(node.id) + ": no sigma^2_u in (0,1) reached [" +
      std::to_string(lo_db) + "," + std::to_string(hi_db) + "] dB after " +
      std::to_string(max_attempts) + " draws; achievable range is (-inf, " +
      std::to_string(top) + ") dB");
}

}  // namespace nspe
