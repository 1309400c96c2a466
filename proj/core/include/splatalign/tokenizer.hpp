#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "splatalign/curves.hpp"
#include "splatalign/gaussian.hpp"
#include "splatalign/param_set.hpp"
#include "splatalign/patches.hpp"
#include "splatalign/tensor.hpp"

namespace splatalign {

struct TokenizerConfig {
  std::size_t num_patches = 64;  // g
  std::size_t neighbors = 16;    // n
  std::size_t points = 1024;     // subsample target per cloud
  std::vector<Ordering> orderings{Ordering::xyz, Ordering::hilbert, Ordering::z_order};
  unsigned quant_bits = 10;
  std::size_t token_dim = 64;  // d, equals the encoder width

  // Throws ArgumentError on inconsistent values.
  void validate() const;
  bool operator==(const TokenizerConfig&) const = default;
};

// Parameter-free preprocessing of one cloud: patches plus one serialization
// permutation per enabled ordering. Cached across training steps.
struct PreparedPatches {
  PatchSet patches;
  std::vector<std::vector<std::size_t>> permutations;
};

struct TokenSequence {
  Matrix tokens;  // g x d, unpermuted
  std::vector<Ordering> orderings;
  std::vector<std::vector<std::size_t>> permutations;  // one per ordering
};

PreparedPatches prepare_patches(const GaussianCloud& cloud, const TokenizerConfig& config,
                                std::uint64_t seed = 0,
                                NormalizationStats* stats = nullptr);

// End-to-end tokenizer in evaluation mode (BN running statistics). The cloud
// is expected to be subsampled already; see subsample_points.
TokenSequence tokenize(const GaussianCloud& cloud, const TokenizerConfig& config,
                       const ParamSet& params, std::uint64_t seed = 0);

}  // namespace splatalign
