#include "nspe/rng.hpp"

namespace nspe {
namespace {

// Ziggurat tables (Doornik's zignor layout), 128 layers.
constexpr int kLayers = 128;
constexpr double kR = 3.442619855899;
constexpr double kV = 9.91256303526217e-3;

struct Tables {
  double x[kLayers + 1];
  double ratio[kLayers];
  Tables() {
    double f = std::exp(-0.5 * kR * kR);
    x[0] = kV / f;
    x[1] = kR;
    x[kLayers] = 0.0;
    for (int i = 2; i < kLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

double Rng::gaussian_tail(bool negative) {
  double x, y;
  do {
    x = std::log(uniform_open()) / kR;
    y = std::log(uniform_open());
  } while (-2.0 * y < x * x);
  return negative ? x - kR : kR - x;
}

double Rng::gaussian() {
  const Tables& t = tables();
  for (;;) {
    int i = static_cast<int>(next_u64() & (kLayers - 1));
    double u = 2.0 * uniform() - 1.0;
    if (std::fabs(u) < t.ratio[i]) return u * t.x[i];
    if (i == 0) return gaussian_tail(u < 0.0);
    double x = u * t.x[i];
    double f0 = std::exp(-0.5 * (t.x[i] * t.x[i] - x * x));
    double f1 = std::exp(-0.5 * (t.x[i + 1] * t.x[i + 1] - x * x));
    if (f1 + uniform() * (f0 - f1) < 1.0) return x;
  }
}

}  // namespace nspe
