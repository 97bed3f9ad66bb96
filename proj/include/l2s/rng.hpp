#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace l2s {

// Seeded random source. Distributions are implemented here rather than via
// <random> distribution classes so that streams are identical across standard
// library implementations; the engine itself is fully specified by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Uniform in [0, 1) with 53 bits of resolution.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Standard normal (Marsaglia polar method).
  double Normal();

  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t Below(std::uint64_t n);

  std::uint64_t NextU64() { return engine_(); }

  std::string SaveState() const;
  void LoadState(const std::string& state);

  bool operator==(const Rng& other) const;

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace l2s
