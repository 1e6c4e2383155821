#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <vector>

namespace durian::sim {

// mt19937_64 with hand-written uniform/normal draws so that streams are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream keyed by a tuple of integers (seed, step, sample, ...).
  static Rng stream(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    for (auto k : key) {
      words.push_back(static_cast<std::uint32_t>(k));
      words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    Rng r(0);
    r.engine_.seed(seq);
    return r;
  }

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace durian::sim
