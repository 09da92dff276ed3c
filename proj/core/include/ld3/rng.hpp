#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ld3 {

/// Counter-based stream splitting: every (seed, index) pair maps to an
/// independent 64-bit stream seed, so results never depend on which worker
/// handles which index.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Named sub-streams ("prior", "shuffle", ...) of a run seed.
std::uint64_t derive_seed(std::uint64_t seed, const char* purpose) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t index) : engine_(mix_seed(seed, index)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::vector<double> normal_vector(std::size_t d, double scale = 1.0);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ld3
