#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace mtsvm {

// Deterministic counter-based randomness. Streams are keyed by small integer
// tuples, so a draw depends only on its key and position, never on how work
// was scheduled across threads. That is what makes --workers N reproducible.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : state_(splitmix64(seed)) {}

  // Stream keyed by (seed, a, b): mixes each key component separately.
  CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
      : state_(splitmix64(splitmix64(splitmix64(seed) ^ (a + 0x165667B19E3779F9ULL)) ^
                          (b + 0xC2B2AE3D27D4EB4FULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return splitmix64(state_);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // +1/-1 with equal probability.
  double next_sign() {
    return (next_u64() >> 63) ? 1.0 : -1.0;
  }

  // Standard normal via Box-Muller; self-contained so results do not depend
  // on any library's distribution internals.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    have_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  // Uniform integer in [0, n), rejection-sampled; n > 0.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = 0;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Fisher-Yates with our own bounded draws: identical order everywhere.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace mtsvm
