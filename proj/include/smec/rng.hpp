#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

namespace smec {

/// SplitMix64 generator. Every stochastic routine takes one of these by
/// reference; there is no global generator anywhere in the library.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Lemire multiply-shift with rejection.
  std::size_t below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("SplitMix64::below: empty range");
    const auto bound = static_cast<std::uint64_t>(n);
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next();
      const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
      if (static_cast<std::uint64_t>(m) >= threshold)
        return static_cast<std::size_t>(m >> 64);
    }
  }

  /// Index drawn from a probability row. Falls back to the last positive
  /// entry when rounding leaves the cumulative sum just below u.
  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      last = i;
      acc += probs[i];
      if (u < acc) return i;
    }
    return last;
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a base seed and a stream tag.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  SplitMix64 g(base ^ (stream * 0xD1B54A32D192ED03ULL));
  g.next();
  return g.next();
}

// Stream tags used by the training loop.
namespace stream {
inline constexpr std::uint64_t environment = 1;
inline constexpr std::uint64_t behavior = 2;
inline constexpr std::uint64_t replay = 3;
inline constexpr std::uint64_t planner = 4;
inline constexpr std::uint64_t evaluation = 5;
inline constexpr std::uint64_t rollout = 6;
}  // namespace stream

}  // namespace smec
