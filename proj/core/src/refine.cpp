#include "splatalign/refine.hpp"

#include <string>

#include "splatalign/errors.hpp"

namespace splatalign {
namespace {

constexpr Eigen::Index kTaps = 3;

// Rows of the stacked input are (patch, neighbor) pairs. Tap t of row r reads
// neighbor j + t - 1 of the same patch, zero-padded at the patch borders.
Matrix im2col(const Matrix& x, std::size_t neighbors) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index c = x.cols();
  const auto n = static_cast<Eigen::Index>(neighbors);
  Matrix im = Matrix::Zero(rows, kTaps * c);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index j = r % n;
    for (Eigen::Index t = 0; t < kTaps; ++t) {
      const Eigen::Index src = j + t - 1;
      if (src < 0 || src >= n) continue;
      im.block(r, t * c, 1, c) = x.row(r + t - 1);
    }
  }
  return im;
}

Matrix col2im(const Matrix& d_im, std::size_t neighbors, Eigen::Index channels) {
  const Eigen::Index rows = d_im.rows();
  const auto n = static_cast<Eigen::Index>(neighbors);
  Matrix dx = Matrix::Zero(rows, channels);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index j = r % n;
    for (Eigen::Index t = 0; t < kTaps; ++t) {
      const Eigen::Index src = j + t - 1;
      if (src < 0 || src >= n) continue;
      dx.row(r + t - 1) += d_im.block(r, t * channels, 1, channels);
    }
  }
  return dx;
}

// Max over each patch's neighbors; the first maximal row wins ties.
Matrix max_pool(const Matrix& x, std::size_t neighbors, std::vector<Eigen::Index>* argmax) {
  const auto n = static_cast<Eigen::Index>(neighbors);
  const Eigen::Index patches = x.rows() / n;
  Matrix out(patches, x.cols());
  if (argmax) argmax->assign(static_cast<std::size_t>(patches * x.cols()), 0);
  for (Eigen::Index p = 0; p < patches; ++p) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::Index best = p * n;
      for (Eigen::Index r = p * n + 1; r < (p + 1) * n; ++r) {
        if (x(r, c) > x(best, c)) best = r;
      }
      out(p, c) = x(best, c);
      if (argmax) (*argmax)[static_cast<std::size_t>(p * x.cols() + c)] = best;
    }
  }
  return out;
}

Matrix max_pool_backward(const Matrix& d_out, const std::vector<Eigen::Index>& argmax,
                         Eigen::Index rows) {
  Matrix dx = Matrix::Zero(rows, d_out.cols());
  for (Eigen::Index p = 0; p < d_out.rows(); ++p) {
    for (Eigen::Index c = 0; c < d_out.cols(); ++c) {
      dx(argmax[static_cast<std::size_t>(p * d_out.cols() + c)], c) += d_out(p, c);
    }
  }
  return dx;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& d_out, const Matrix& activated) {
  return (activated.array() > 0.0).select(d_out, 0.0);
}

Matrix batch_norm_forward(const Matrix& x, ConstMatrixMap gamma, ConstMatrixMap beta,
                          ConstMatrixMap running_mean, ConstMatrixMap running_var,
                          Mode mode, BatchNormCache* cache) {
  RowVector mean, var;
  if (mode == Mode::train) {
    mean = x.colwise().mean();
    var = (x.rowwise() - mean).array().square().colwise().mean();
  } else {
    mean = running_mean.row(0);
    var = running_var.row(0);
  }
  const RowVector inv_std = (var.array() + kBatchNormEps).rsqrt();
  Matrix x_hat = (x.rowwise() - mean).array().rowwise() * inv_std.array();
  Matrix y = (x_hat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  if (cache) {
    cache->normalized = std::move(x_hat);
    cache->inv_std = inv_std;
    cache->batch_mean = mean;
    cache->batch_var = var;
  }
  return y;
}

Matrix batch_norm_backward(const Matrix& d_y, const BatchNormCache& cache,
                           ConstMatrixMap gamma, MatrixMap d_gamma, MatrixMap d_beta) {
  const auto m = static_cast<double>(d_y.rows());
  d_gamma.row(0) += (d_y.array() * cache.normalized.array()).colwise().sum().matrix();
  d_beta.row(0) += d_y.colwise().sum();
  const Matrix d_hat = d_y.array().rowwise() * gamma.row(0).array();
  const RowVector sum_d = d_hat.colwise().sum();
  const RowVector sum_dx = (d_hat.array() * cache.normalized.array()).colwise().sum().matrix();
  Matrix dx = (m * d_hat).rowwise() - sum_d;
  dx -= (cache.normalized.array().rowwise() * sum_dx.array()).matrix();
  dx = dx.array().rowwise() * (cache.inv_std.array() / m);
  return dx;
}

}  // namespace

void register_tokenizer_params(ParamSet& params, const TokenizerConfig& config) {
  const std::size_t d = config.token_dim;
  const std::size_t f = kPatchFeatures;
  const auto weight = [&](std::string name, std::size_t in, std::size_t out) {
    params.add({std::move(name), {in, out}, ParamGroup::tokenizer, true,
                ParamInit::truncated_normal, 0.02});
  };
  const auto vec = [&](std::string name, std::size_t n, ParamGroup group, ParamInit init) {
    params.add({std::move(name), {n}, group, false, init, 0.0});
  };
  weight("tokenizer.point.fc1.weight", kPositionColorFeatures, d);
  vec("tokenizer.point.fc1.bias", d, ParamGroup::tokenizer, ParamInit::zeros);
  weight("tokenizer.point.fc2.weight", d, d);
  vec("tokenizer.point.fc2.bias", d, ParamGroup::tokenizer, ParamInit::zeros);
  weight("tokenizer.conv1.weight", kTaps * f, d);
  vec("tokenizer.bn1.weight", d, ParamGroup::tokenizer, ParamInit::ones);
  vec("tokenizer.bn1.bias", d, ParamGroup::tokenizer, ParamInit::zeros);
  vec("tokenizer.bn1.running_mean", d, ParamGroup::buffer, ParamInit::zeros);
  vec("tokenizer.bn1.running_var", d, ParamGroup::buffer, ParamInit::ones);
  weight("tokenizer.conv2.weight", kTaps * d, d);
  vec("tokenizer.bn2.weight", d, ParamGroup::tokenizer, ParamInit::ones);
  vec("tokenizer.bn2.bias", d, ParamGroup::tokenizer, ParamInit::zeros);
  vec("tokenizer.bn2.running_mean", d, ParamGroup::buffer, ParamInit::zeros);
  vec("tokenizer.bn2.running_var", d, ParamGroup::buffer, ParamInit::ones);
  weight("tokenizer.fuse.weight", 2 * d, d);
  vec("tokenizer.fuse.bias", d, ParamGroup::tokenizer, ParamInit::zeros);
}

TokenizerLayout TokenizerLayout::bind(const ParamSet& p) {
  TokenizerLayout l{};
  l.point_fc1_w = p.index("tokenizer.point.fc1.weight");
  l.point_fc1_b = p.index("tokenizer.point.fc1.bias");
  l.point_fc2_w = p.index("tokenizer.point.fc2.weight");
  l.point_fc2_b = p.index("tokenizer.point.fc2.bias");
  l.conv1_w = p.index("tokenizer.conv1.weight");
  l.bn1_gamma = p.index("tokenizer.bn1.weight");
  l.bn1_beta = p.index("tokenizer.bn1.bias");
  l.bn1_mean = p.index("tokenizer.bn1.running_mean");
  l.bn1_var = p.index("tokenizer.bn1.running_var");
  l.conv2_w = p.index("tokenizer.conv2.weight");
  l.bn2_gamma = p.index("tokenizer.bn2.weight");
  l.bn2_beta = p.index("tokenizer.bn2.bias");
  l.bn2_mean = p.index("tokenizer.bn2.running_mean");
  l.bn2_var = p.index("tokenizer.bn2.running_var");
  l.fuse_w = p.index("tokenizer.fuse.weight");
  l.fuse_b = p.index("tokenizer.fuse.bias");
  l.dim = p.spec(l.fuse_w).shape[1];
  return l;
}

RefineResult refine_forward(const Matrix& features, std::size_t neighbors,
                            const ParamSet& params, Mode mode, RefineCache* cache) {
  if (features.cols() != static_cast<Eigen::Index>(kPatchFeatures)) {
    throw ArgumentError("refine: features must have 19 columns");
  }
  if (neighbors == 0 || features.rows() % static_cast<Eigen::Index>(neighbors) != 0) {
    throw ArgumentError("refine: feature rows are not a multiple of the neighbor count");
  }
  const auto L = TokenizerLayout::bind(params);

  // Point path.
  const Matrix pc = features.leftCols(static_cast<Eigen::Index>(kPositionColorFeatures));
  Matrix hidden = pc * params.matrix(L.point_fc1_w);
  hidden.rowwise() += params.matrix(L.point_fc1_b).row(0);
  hidden = relu(hidden);
  Matrix point_out = hidden * params.matrix(L.point_fc2_w);
  point_out.rowwise() += params.matrix(L.point_fc2_b).row(0);
  std::vector<Eigen::Index> point_argmax;
  Matrix point_pooled = max_pool(point_out, neighbors, cache ? &point_argmax : nullptr);

  // Conv path.
  Matrix im1 = im2col(features, neighbors);
  BatchNormCache bn1, bn2;
  Matrix r1 = relu(batch_norm_forward(im1 * params.matrix(L.conv1_w), params.matrix(L.bn1_gamma),
                                      params.matrix(L.bn1_beta), params.matrix(L.bn1_mean),
                                      params.matrix(L.bn1_var), mode, cache ? &bn1 : nullptr));
  Matrix im2 = im2col(r1, neighbors);
  Matrix r2 = relu(batch_norm_forward(im2 * params.matrix(L.conv2_w), params.matrix(L.bn2_gamma),
                                      params.matrix(L.bn2_beta), params.matrix(L.bn2_mean),
                                      params.matrix(L.bn2_var), mode, cache ? &bn2 : nullptr));
  std::vector<Eigen::Index> conv_argmax;
  Matrix conv_pooled = max_pool(r2, neighbors, cache ? &conv_argmax : nullptr);

  Matrix fused(point_pooled.rows(), point_pooled.cols() + conv_pooled.cols());
  fused << point_pooled, conv_pooled;
  Matrix tokens = fused * params.matrix(L.fuse_w);
  tokens.rowwise() += params.matrix(L.fuse_b).row(0);

  if (cache) {
    cache->neighbors = neighbors;
    cache->rows = static_cast<std::size_t>(features.rows());
    cache->features = features;
    cache->point_hidden = std::move(hidden);
    cache->point_argmax = std::move(point_argmax);
    cache->im1 = std::move(im1);
    cache->bn1 = std::move(bn1);
    cache->relu1 = std::move(r1);
    cache->im2 = std::move(im2);
    cache->bn2 = std::move(bn2);
    cache->relu2 = std::move(r2);
    cache->conv_argmax = std::move(conv_argmax);
    cache->fused_input = fused;
  }
  return {std::move(tokens), std::move(point_pooled), std::move(conv_pooled)};
}

void refine_backward(const RefineCache& cache, const Matrix& d_tokens,
                     const ParamSet& params, ParamSet& grads) {
  if (cache.rows == 0) throw StateError("refine_backward called without a recorded forward");
  const auto L = TokenizerLayout::bind(params);
  const auto rows = static_cast<Eigen::Index>(cache.rows);
  const auto d = static_cast<Eigen::Index>(L.dim);
  if (d_tokens.rows() != cache.fused_input.rows() || d_tokens.cols() != d) {
    throw ArgumentError("refine_backward: token gradient has the wrong shape");
  }

  grads.matrix(L.fuse_w) += cache.fused_input.transpose() * d_tokens;
  grads.matrix(L.fuse_b).row(0) += d_tokens.colwise().sum();
  const Matrix d_fused = d_tokens * params.matrix(L.fuse_w).transpose();

  // Point path.
  const Matrix d_point_out = max_pool_backward(d_fused.leftCols(d), cache.point_argmax, rows);
  grads.matrix(L.point_fc2_w) += cache.point_hidden.transpose() * d_point_out;
  grads.matrix(L.point_fc2_b).row(0) += d_point_out.colwise().sum();
  const Matrix d_hidden =
      relu_backward(d_point_out * params.matrix(L.point_fc2_w).transpose(), cache.point_hidden);
  grads.matrix(L.point_fc1_w) +=
      cache.features.leftCols(static_cast<Eigen::Index>(kPositionColorFeatures)).transpose() *
      d_hidden;
  grads.matrix(L.point_fc1_b).row(0) += d_hidden.colwise().sum();

  // Conv path.
  const Matrix d_r2 = max_pool_backward(d_fused.rightCols(d), cache.conv_argmax, rows);
  const Matrix d_bn2 = relu_backward(d_r2, cache.relu2);
  const Matrix d_u2 = batch_norm_backward(d_bn2, cache.bn2, params.matrix(L.bn2_gamma),
                                          grads.matrix(L.bn2_gamma), grads.matrix(L.bn2_beta));
  grads.matrix(L.conv2_w) += cache.im2.transpose() * d_u2;
  const Matrix d_r1 = col2im(d_u2 * params.matrix(L.conv2_w).transpose(), cache.neighbors, d);
  const Matrix d_bn1 = relu_backward(d_r1, cache.relu1);
  const Matrix d_u1 = batch_norm_backward(d_bn1, cache.bn1, params.matrix(L.bn1_gamma),
                                          grads.matrix(L.bn1_gamma), grads.matrix(L.bn1_beta));
  grads.matrix(L.conv1_w) += cache.im1.transpose() * d_u1;
}

void commit_running_stats(const RefineCache& cache, ParamSet& params) {
  if (cache.rows == 0) throw StateError("commit_running_stats without a recorded forward");
  const auto L = TokenizerLayout::bind(params);
  const double m = static_cast<double>(cache.rows);
  const double unbias = m > 1 ? m / (m - 1) : 1.0;
  const auto update = [&](std::size_t mean_i, std::size_t var_i, const BatchNormCache& bn) {
    auto mean = params.matrix(mean_i);
    auto var = params.matrix(var_i);
    mean.row(0) = (1.0 - kBatchNormMomentum) * mean.row(0) + kBatchNormMomentum * bn.batch_mean;
    var.row(0) = (1.0 - kBatchNormMomentum) * var.row(0) +
                 kBatchNormMomentum * unbias * bn.batch_var;
  };
  update(L.bn1_mean, L.bn1_var, cache.bn1);
  update(L.bn2_mean, L.bn2_var, cache.bn2);
}

Matrix refine_patches(const PatchSet& patches, const ParamSet& params) {
  return refine_forward(patches.features, patches.neighbors, params, Mode::eval).tokens;
}

}  // namespace splatalign
