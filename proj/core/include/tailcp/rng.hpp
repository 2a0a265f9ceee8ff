#ifndef TAILCP_RNG_HPP
#define TAILCP_RNG_HPP

#include <cmath>
#include <cstdint>

// Self-contained counter-style RNG so that every seeded result is reproducible
// bit-for-bit regardless of platform or standard-library version. Standard
// <random> distributions are implementation-defined and would break the
// determinism contract of the experiment harness.

namespace tailcp {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from (seed, salt). Used to give every
// trial / sample / subsystem its own stream, so evaluation order and
// parallel scheduling never affect results.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt + 0x632BE59BD9B4E019ull));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1); safe as a log() argument.
  double uniform_open() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. No caching of the second value, so the
  // draw count per call is fixed and streams stay aligned.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, bound) by rejection; unbiased.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

// Stream salts. Every randomized subsystem draws from its own derived stream.
namespace stream {
inline constexpr std::uint64_t kTrial = 0x745249414C;
inline constexpr std::uint64_t kSynthLabels = 0x4C41424C53;
inline constexpr std::uint64_t kSynthLogits = 0x4C4F47495453;
inline constexpr std::uint64_t kSplit = 0x53504C4954;
inline constexpr std::uint64_t kScoreCal = 0x5343414C;
inline constexpr std::uint64_t kScorePred = 0x53505245;
inline constexpr std::uint64_t kCluster = 0x434C5553;
inline constexpr std::uint64_t kTune = 0x54554E45;
inline constexpr std::uint64_t kScoreSpec = 0x53504543;
}  // namespace stream

}  // namespace tailcp

#endif  // TAILCP_RNG_HPP
