#pragma once

#include <cstddef>
#include <vector>

#include "splatalign/param_set.hpp"
#include "splatalign/patches.hpp"
#include "splatalign/tensor.hpp"
#include "splatalign/tokenizer.hpp"

namespace splatalign {

enum class Mode { train, eval };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// GS refinement block. Two paths run over every patch of n neighbors:
//   point path: shared MLP on position+color (6 -> d -> d), max-pool
//   conv path:  [1x3 conv over neighbors -> BN -> ReLU] x 2 on all 19
//               features, max-pool
// and a linear layer fuses the concatenated pooled vectors into a token.
// Convolutions are unbiased; BN supplies the shift.
void register_tokenizer_params(ParamSet& params, const TokenizerConfig& config);

struct TokenizerLayout {
  std::size_t point_fc1_w, point_fc1_b, point_fc2_w, point_fc2_b;
  std::size_t conv1_w, bn1_gamma, bn1_beta, bn1_mean, bn1_var;
  std::size_t conv2_w, bn2_gamma, bn2_beta, bn2_mean, bn2_var;
  std::size_t fuse_w, fuse_b;
  std::size_t dim = 0;

  static TokenizerLayout bind(const ParamSet& params);
};

struct BatchNormCache {
  Matrix normalized;  // x_hat
  RowVector inv_std;
  RowVector batch_mean;
  RowVector batch_var;  // biased
};

// Intermediates of one batched refine pass. Features of every patch in the
// batch are stacked, so BN statistics in train mode span the whole batch.
struct RefineCache {
  std::size_t neighbors = 0;
  std::size_t rows = 0;  // total patches * neighbors
  Matrix features;
  Matrix point_hidden;                     // post-ReLU
  std::vector<Eigen::Index> point_argmax;  // patches x d
  Matrix im1;
  BatchNormCache bn1;
  Matrix relu1;
  Matrix im2;
  BatchNormCache bn2;
  Matrix relu2;
  std::vector<Eigen::Index> conv_argmax;
  Matrix fused_input;  // patches x 2d
};

struct RefineResult {
  Matrix tokens;        // patches x d
  Matrix point_pooled;  // patches x d
  Matrix conv_pooled;   // patches x d
};

// `features` is (patches * neighbors) x 19, patch-major. With a cache the
// intermediates needed by refine_backward are recorded.
RefineResult refine_forward(const Matrix& features, std::size_t neighbors,
                            const ParamSet& params, Mode mode,
                            RefineCache* cache = nullptr);

// Accumulates tokenizer parameter gradients into `grads`.
void refine_backward(const RefineCache& cache, const Matrix& d_tokens,
                     const ParamSet& params, ParamSet& grads);

// Exponential moving update of the BN running statistics from a train-mode
// cache (unbiased variance, momentum 0.1).
void commit_running_stats(const RefineCache& cache, ParamSet& params);

// Single patch set in evaluation mode.
Matrix refine_patches(const PatchSet& patches, const ParamSet& params);

}  // namespace splatalign
