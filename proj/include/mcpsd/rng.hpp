#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mcpsd {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for an independent substream of a master seed. Streams with distinct
// indices are decorrelated even when master seeds are small consecutive ints.
inline std::uint64_t substreamSeed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t t = splitmix64(s) + index;
  return splitmix64(t);
}

// Deterministic generator with a fixed sampling discipline so that output
// streams are reproducible across platforms and compiler versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  static Rng substream(std::uint64_t master, std::uint64_t index) {
    return Rng(substreamSeed(master, index));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; spare value cached between calls.
  double normal() {
    if (haveSpare_) {
      haveSpare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    haveSpare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, bound) by rejection, bound >= 1.
  int uniformInt(int bound) {
    const auto span = static_cast<std::uint64_t>(bound);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return static_cast<int>(v % span);
  }

 private:
  std::mt19937_64 eng_;
  bool haveSpare_ = false;
  double spare_ = 0.0;
};

}  // namespace mcpsd
