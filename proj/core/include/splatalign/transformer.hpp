#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "splatalign/curves.hpp"
#include "splatalign/param_set.hpp"
#include "splatalign/tensor.hpp"
#include "splatalign/tokenizer.hpp"

namespace splatalign {

struct EncoderConfig {
  std::string preset = "nano";
  std::size_t depth = 2;
  std::size_t width = 64;
  std::size_t heads = 2;
  std::size_t clip_dim = 64;

  // nano(2,64,2), tiny(12,192,3), small(12,384,6), base(12,768,12),
  // large(24,1024,16) as (depth, width, heads).
  static EncoderConfig from_preset(const std::string& name, std::size_t clip_dim);
  static std::vector<std::string> preset_names();
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

inline constexpr double kLayerNormEps = 1e-6;
inline constexpr std::size_t kMlpRatio = 4;

std::string positional_table_name(Ordering o);

// Class token, one (g+1) x width positional table per ordering, pre-norm
// blocks (LN -> MHSA -> residual, LN -> GELU MLP -> residual), a final LN on
// the class output and an unbiased width -> clip_dim projection.
void register_encoder_params(ParamSet& params, const EncoderConfig& config,
                             std::span<const Ordering> orderings, std::size_t num_patches);

std::size_t count_positional_tables(const ParamSet& params);

struct LayerNormCache {
  Matrix normalized;
  Vector inv_std;
};

struct BlockCache {
  LayerNormCache ln1;
  Matrix ln1_out;
  Matrix qkv;
  std::vector<Matrix> attention;  // softmax probabilities per head
  Matrix heads_out;
  LayerNormCache ln2;
  Matrix ln2_out;
  Matrix mlp_pre;
  Matrix mlp_act;
};

struct OrderingPass {
  std::size_t table = 0;  // positional tensor index
  std::vector<std::size_t> permutation;
  std::vector<BlockCache> blocks;
  LayerNormCache final_ln;
};

struct EncoderCache {
  std::vector<OrderingPass> passes;
  RowVector pooled;       // averaged class output
  RowVector projected;    // before L2 normalization
  RowVector embedding;
  double norm = 0.0;
  std::size_t num_tokens = 0;
};

// Runs the transformer once per ordering on the permuted tokens and returns
// the unit-normalized embedding. Throws NumericError naming the layer when an
// activation becomes non-finite, and when the projection is exactly zero.
Vector encoder_forward(const Matrix& tokens, std::span<const Ordering> orderings,
                       std::span<const std::vector<std::size_t>> permutations,
                       const ParamSet& params, const EncoderConfig& config,
                       EncoderCache* cache = nullptr);

inline Vector encoder_forward(const TokenSequence& seq, const ParamSet& params,
                              const EncoderConfig& config, EncoderCache* cache = nullptr) {
  return encoder_forward(seq.tokens, seq.orderings, seq.permutations, params, config, cache);
}

// Accumulates encoder gradients into `grads` and returns d(loss)/d(tokens).
Matrix encoder_backward(const EncoderCache& cache, const Vector& d_embedding,
                        const ParamSet& params, const EncoderConfig& config, ParamSet& grads);

}  // namespace splatalign
