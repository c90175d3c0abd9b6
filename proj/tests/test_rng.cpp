#include <cmath>
#include <doctest.h>
#include <vector>

#include "nspe/rng.hpp"

using nspe::Rng;
using nspe::StreamSeed;

TEST_CASE("counter addressing regenerates any instant bit-exactly") {
  const StreamSeed s{123, 4, 5};
  Rng a = Rng::at_time(s, 1000);
  std::vector<std::uint64_t> first;
  for (int j = 0; j < 8; ++j) first.push_back(a.next_u64());
  // Consume a lot of an unrelated stream in between; addressing must not care.
  Rng other = Rng::at_time(s, 999);
  for (int j = 0; j < 1000; ++j) other.next_u64();
  Rng b = Rng::at_time(s, 1000);
  for (int j = 0; j < 8; ++j) CHECK(b.next_u64() == first[j]);
}

TEST_CASE("distinct streams and instants differ") {
  const StreamSeed s{123, 4, 5};
  const std::uint64_t base = Rng::at_time(s, 7).next_u64();
  CHECK(Rng::at_time(s, 8).next_u64() != base);
  CHECK(Rng::at_time({123, 4, 6}, 7).next_u64() != base);
  CHECK(Rng::at_time({123, 5, 5}, 7).next_u64() != base);
  CHECK(Rng::at_time({124, 4, 5}, 7).next_u64() != base);
  CHECK(Rng::from(123, nspe::purpose::kTruth, 4).next_u64() !=
        Rng::from(123, nspe::purpose::kCalibration, 4).next_u64());
}

TEST_CASE("uniform moments") {
  Rng r = Rng::from(1, nspe::purpose::kObservation, 0, 0, 0);
  const int n = 1'000'000;
  double sum = 0, sum2 = 0;
  for (int j = 0; j < n; ++j) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  // 4 standard errors of the Monte Carlo estimate
  CHECK(std::fabs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::fabs(var - 1.0 / 12.0) < 4.0 * std::sqrt(1.0 / 180.0 / n));
}

TEST_CASE("gaussian moments and tail mass") {
  Rng r = Rng::from(2, nspe::purpose::kObservation, 0, 0, 0);
  const int n = 2'000'000;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  int tail3 = 0;
  for (int j = 0; j < n; ++j) {
    const double x = r.gaussian();
    s1 += x;
    const double x2 = x * x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
    if (std::fabs(x) > 3.0) ++tail3;
  }
  const double mean = s1 / n, var = s2 / n;
  CHECK(std::fabs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::fabs(s3 / n) < 5.0 * std::sqrt(15.0 / n));  // skewness numerator
  CHECK(std::fabs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
  // P(|X| > 3) = 0.0026998; binomial 5-sigma band
  const double p = 0.0026998;
  CHECK(std::fabs(tail3 / static_cast<double>(n) - p) <
        5.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("streams of different nodes are uncorrelated") {
  Rng a = Rng::from(3, nspe::purpose::kObservation, 0, 0, 0);
  Rng b = Rng::from(3, nspe::purpose::kObservation, 0, 1, 0);
  const int n = 200'000;
  double sxy = 0;
  for (int j = 0; j < n; ++j) sxy += a.gaussian() * b.gaussian();
  CHECK(std::fabs(sxy / n) < 5.0 / std::sqrt(static_cast<double>(n)));
}
