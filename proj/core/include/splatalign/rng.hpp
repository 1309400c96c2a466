#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace splatalign {

// Derives an independent seed for a named sub-stream ("init", "batching",
// "views", ...) so every random consumer is reproducible from one run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                          std::uint64_t index = 0);

// mt19937_64 plus distribution helpers whose output does not depend on the
// standard library implementation (std::*_distribution is unspecified).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0)
      : engine_(derive_seed(seed, stream, index)) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  double normal();
  // Normal truncated to [-2 std, 2 std] by resampling.
  double truncated_normal(double std);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace splatalign
