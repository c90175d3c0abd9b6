#pragma once

#include <cmath>
#include <cstdint>

namespace nspe {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

// Identifies one independent sample stream: (master seed, Monte Carlo run,
// node). The time index enters as a counter, so regenerating any instant is
// independent of how much of the stream was consumed before.
struct StreamSeed {
  std::uint64_t master_seed = 0;
  std::uint64_t run_index = 0;
  std::uint64_t node = 0;
};

namespace purpose {
inline constexpr std::uint64_t kObservation = 0x6f627365727661ull;
inline constexpr std::uint64_t kTruth = 0x747275746800ull;
inline constexpr std::uint64_t kCalibration = 0x63616c6962ull;
}  // namespace purpose

// Counter-based generator: state walks the splitmix64 sequence from a
// position derived by hashing the identifying tuple.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : s_(state) {}

  static Rng from(std::uint64_t master, std::uint64_t word_purpose,
                  std::uint64_t a = 0, std::uint64_t b = 0,
                  std::uint64_t c = 0) {
    std::uint64_t s = mix64(master + 0x9e3779b97f4a7c15ull);
    s = mix64(s ^ word_purpose);
    s = mix64(s ^ (a + 0xd1b54a32d192ed03ull));
    s = mix64(s ^ (b + 0x8cb92ba72f3d8dd7ull));
    s = mix64(s ^ (c + 0xa24baed4963ee407ull));
    return Rng(s);
  }

  static Rng at_time(const StreamSeed& stream, std::uint64_t i) {
    return from(stream.master_seed, purpose::kObservation, stream.run_index,
                stream.node, i);
  }

  std::uint64_t next_u64() {
    s_ += 0x9e3779b97f4a7c15ull;
    return mix64(s_);
  }

  // [0, 1)
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1)
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  // Standard normal via a 128-layer ziggurat.
  double gaussian();

 private:
  double gaussian_tail(bool negative);

  std::uint64_t s_;
};

}  // namespace nspe
