#include "splatalign/tokenizer.hpp"

#include "splatalign/errors.hpp"
#include "splatalign/refine.hpp"

namespace splatalign {

void TokenizerConfig::validate() const {
  if (num_patches == 0) throw ArgumentError("tokenizer: num_patches must be >= 1");
  if (neighbors == 0) throw ArgumentError("tokenizer: neighbors must be >= 1");
  if (points < num_patches || points < neighbors) {
    throw ArgumentError("tokenizer: points per cloud must be >= num_patches and >= neighbors");
  }
  if (orderings.empty()) throw ArgumentError("tokenizer: at least one ordering is required");
  for (std::size_t i = 0; i < orderings.size(); ++i) {
    for (std::size_t j = i + 1; j < orderings.size(); ++j) {
      if (orderings[i] == orderings[j]) {
        throw ArgumentError("tokenizer: duplicate ordering '" +
                            std::string(ordering_name(orderings[i])) + "'");
      }
    }
  }
  if (quant_bits < 1 || quant_bits > kMaxCurveBits) {
    throw ArgumentError("tokenizer: quant_bits must be in [1, 21]");
  }
  if (token_dim == 0) throw ArgumentError("tokenizer: token_dim must be >= 1");
}

PreparedPatches prepare_patches(const GaussianCloud& cloud, const TokenizerConfig& config,
                                std::uint64_t seed, NormalizationStats* stats) {
  config.validate();
  PreparedPatches out;
  out.patches = build_patches(cloud, config.num_patches, config.neighbors, seed, stats);
  for (Ordering o : config.orderings) {
    out.permutations.push_back(order_patches(out.patches.centers, o, config.quant_bits));
  }
  return out;
}

TokenSequence tokenize(const GaussianCloud& cloud, const TokenizerConfig& config,
                       const ParamSet& params, std::uint64_t seed) {
  PreparedPatches prepared = prepare_patches(cloud, config, seed);
  TokenSequence seq;
  seq.tokens = refine_patches(prepared.patches, params);
  seq.orderings = config.orderings;
  seq.permutations = std::move(prepared.permutations);
  return seq;
}

}  // namespace splatalign
