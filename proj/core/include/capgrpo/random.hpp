// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness with a platform-independent mapping from engine output to
// uniform variates (the standard distributions are implementation-defined).

#ifndef CAPGRPO_RANDOM_HPP_
#define CAPGRPO_RANDOM_HPP_

#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace capgrpo {

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  std::string state() const {
    std::ostringstream ss;
    ss << engine_;
    return ss.str();
  }

  void set_state(const std::string& s) {
    std::istringstream ss(s);
    ss >> engine_;
    if (!ss) throw std::runtime_error("malformed RNG state");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace capgrpo

#endif  // CAPGRPO_RANDOM_HPP_
