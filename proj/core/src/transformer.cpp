#include "splatalign/transformer.hpp"

#include <cmath>
#include <numbers>

#include "splatalign/errors.hpp"

namespace splatalign {
namespace {

struct BlockLayout {
  std::size_t ln1_w, ln1_b, qkv_w, qkv_b, proj_w, proj_b;
  std::size_t ln2_w, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
};

struct EncoderLayout {
  std::size_t cls;
  std::vector<BlockLayout> blocks;
  std::size_t norm_w, norm_b, head_w;

  static EncoderLayout bind(const ParamSet& p, std::size_t depth) {
    EncoderLayout l{};
    l.cls = p.index("encoder.cls_token");
    for (std::size_t i = 0; i < depth; ++i) {
      const std::string b = "encoder.blocks." + std::to_string(i) + ".";
      l.blocks.push_back({p.index(b + "norm1.weight"), p.index(b + "norm1.bias"),
                          p.index(b + "attn.qkv.weight"), p.index(b + "attn.qkv.bias"),
                          p.index(b + "attn.proj.weight"), p.index(b + "attn.proj.bias"),
                          p.index(b + "norm2.weight"), p.index(b + "norm2.bias"),
                          p.index(b + "mlp.fc1.weight"), p.index(b + "mlp.fc1.bias"),
                          p.index(b + "mlp.fc2.weight"), p.index(b + "mlp.fc2.bias")});
    }
    l.norm_w = p.index("encoder.norm.weight");
    l.norm_b = p.index("encoder.norm.bias");
    l.head_w = p.index("encoder.head.weight");
    return l;
  }
};

Matrix layer_norm(const Matrix& x, ConstMatrixMap gamma, ConstMatrixMap beta,
                  LayerNormCache* cache) {
  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  const Vector var = centered.array().square().rowwise().mean();
  const Vector inv_std = (var.array() + kLayerNormEps).rsqrt();
  Matrix x_hat = centered.array().colwise() * inv_std.array();
  Matrix y = (x_hat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  if (cache) {
    cache->normalized = std::move(x_hat);
    cache->inv_std = inv_std;
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& d_y, const LayerNormCache& cache,
                           ConstMatrixMap gamma, MatrixMap d_gamma, MatrixMap d_beta) {
  d_gamma.row(0) += (d_y.array() * cache.normalized.array()).colwise().sum().matrix();
  d_beta.row(0) += d_y.colwise().sum();
  const Matrix d_hat = d_y.array().rowwise() * gamma.row(0).array();
  const Vector mean_d = d_hat.rowwise().mean();
  const Vector mean_dx = (d_hat.array() * cache.normalized.array()).rowwise().mean();
  Matrix dx = d_hat.colwise() - mean_d;
  dx -= (cache.normalized.array().colwise() * mean_dx.array()).matrix();
  return dx.array().colwise() * cache.inv_std.array();
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void softmax_rows(Matrix& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

void check_finite(const Matrix& x, std::size_t layer) {
  if (!x.allFinite()) {
    throw NumericError("non-finite activation in encoder layer " + std::to_string(layer));
  }
}

Matrix block_forward(const Matrix& x, const BlockLayout& b, const ParamSet& p,
                     std::size_t heads, BlockCache* cache) {
  const Eigen::Index L = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  LayerNormCache ln1;
  Matrix a = layer_norm(x, p.matrix(b.ln1_w), p.matrix(b.ln1_b), &ln1);
  Matrix qkv = a * p.matrix(b.qkv_w);
  qkv.rowwise() += p.matrix(b.qkv_b).row(0);

  Matrix heads_out(L, d);
  std::vector<Matrix> probs;
  for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(heads); ++h) {
    const auto q = qkv.middleCols(h * dh, dh);
    const auto k = qkv.middleCols(d + h * dh, dh);
    const auto v = qkv.middleCols(2 * d + h * dh, dh);
    Matrix s = (q * k.transpose()) * scale;
    softmax_rows(s);
    heads_out.middleCols(h * dh, dh) = s * v;
    if (cache) probs.push_back(std::move(s));
  }
  Matrix x1 = x + heads_out * p.matrix(b.proj_w);
  x1.rowwise() += p.matrix(b.proj_b).row(0);

  LayerNormCache ln2;
  Matrix bn = layer_norm(x1, p.matrix(b.ln2_w), p.matrix(b.ln2_b), &ln2);
  Matrix pre = bn * p.matrix(b.fc1_w);
  pre.rowwise() += p.matrix(b.fc1_b).row(0);
  Matrix act = pre.unaryExpr([](double v) { return gelu(v); });
  Matrix out = x1 + act * p.matrix(b.fc2_w);
  out.rowwise() += p.matrix(b.fc2_b).row(0);

  if (cache) {
    cache->ln1 = std::move(ln1);
    cache->ln1_out = std::move(a);
    cache->qkv = std::move(qkv);
    cache->attention = std::move(probs);
    cache->heads_out = std::move(heads_out);
    cache->ln2 = std::move(ln2);
    cache->ln2_out = std::move(bn);
    cache->mlp_pre = std::move(pre);
    cache->mlp_act = std::move(act);
  }
  return out;
}

Matrix block_backward(const Matrix& d_out, const BlockCache& c, const BlockLayout& b,
                      const ParamSet& p, std::size_t heads, ParamSet& g) {
  const Eigen::Index L = d_out.rows();
  const Eigen::Index d = d_out.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // MLP branch; the residual passes d_out straight through.
  g.matrix(b.fc2_w) += c.mlp_act.transpose() * d_out;
  g.matrix(b.fc2_b).row(0) += d_out.colwise().sum();
  Matrix d_pre = d_out * p.matrix(b.fc2_w).transpose();
  d_pre.array() *= c.mlp_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  g.matrix(b.fc1_w) += c.ln2_out.transpose() * d_pre;
  g.matrix(b.fc1_b).row(0) += d_pre.colwise().sum();
  const Matrix d_ln2 = d_pre * p.matrix(b.fc1_w).transpose();
  const Matrix d_x1 = d_out + layer_norm_backward(d_ln2, c.ln2, p.matrix(b.ln2_w),
                                                  g.matrix(b.ln2_w), g.matrix(b.ln2_b));

  // Attention branch.
  g.matrix(b.proj_w) += c.heads_out.transpose() * d_x1;
  g.matrix(b.proj_b).row(0) += d_x1.colwise().sum();
  const Matrix d_heads = d_x1 * p.matrix(b.proj_w).transpose();
  Matrix d_qkv(L, 3 * d);
  for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(heads); ++h) {
    const auto q = c.qkv.middleCols(h * dh, dh);
    const auto k = c.qkv.middleCols(d + h * dh, dh);
    const auto v = c.qkv.middleCols(2 * d + h * dh, dh);
    const Matrix& prob = c.attention[static_cast<std::size_t>(h)];
    const auto d_o = d_heads.middleCols(h * dh, dh);
    const Matrix d_prob = d_o * v.transpose();
    d_qkv.middleCols(2 * d + h * dh, dh) = prob.transpose() * d_o;
    const Vector row_dot = (d_prob.array() * prob.array()).rowwise().sum();
    const Matrix d_s = prob.array() * (d_prob.colwise() - row_dot).array();
    d_qkv.middleCols(h * dh, dh) = (d_s * k) * scale;
    d_qkv.middleCols(d + h * dh, dh) = (d_s.transpose() * q) * scale;
  }
  g.matrix(b.qkv_w) += c.ln1_out.transpose() * d_qkv;
  g.matrix(b.qkv_b).row(0) += d_qkv.colwise().sum();
  const Matrix d_ln1 = d_qkv * p.matrix(b.qkv_w).transpose();
  return d_x1 + layer_norm_backward(d_ln1, c.ln1, p.matrix(b.ln1_w), g.matrix(b.ln1_w),
                                    g.matrix(b.ln1_b));
}

}  // namespace

EncoderConfig EncoderConfig::from_preset(const std::string& name, std::size_t clip_dim) {
  EncoderConfig c;
  c.preset = name;
  c.clip_dim = clip_dim;
  if (name == "nano") {
    c.depth = 2, c.width = 64, c.heads = 2;
  } else if (name == "tiny") {
    c.depth = 12, c.width = 192, c.heads = 3;
  } else if (name == "small") {
    c.depth = 12, c.width = 384, c.heads = 6;
  } else if (name == "base") {
    c.depth = 12, c.width = 768, c.heads = 12;
  } else if (name == "large") {
    c.depth = 24, c.width = 1024, c.heads = 16;
  } else {
    throw ArgumentError("unknown encoder preset '" + name +
                        "' (expected nano, tiny, small, base or large)");
  }
  return c;
}

std::vector<std::string> EncoderConfig::preset_names() {
  return {"nano", "tiny", "small", "base", "large"};
}

void EncoderConfig::validate() const {
  if (depth == 0 || width == 0 || heads == 0 || clip_dim == 0) {
    throw ArgumentError("encoder: depth, width, heads and clip_dim must be positive");
  }
  if (width % heads != 0) {
    throw ArgumentError("encoder: width " + std::to_string(width) +
                        " is not divisible by heads " + std::to_string(heads));
  }
}

std::string positional_table_name(Ordering o) {
  return "encoder.pos_embed." + std::string(ordering_name(o));
}

void register_encoder_params(ParamSet& params, const EncoderConfig& config,
                             std::span<const Ordering> orderings, std::size_t num_patches) {
  config.validate();
  const std::size_t d = config.width;
  const auto weight = [&](std::string name, std::size_t in, std::size_t out) {
    params.add({std::move(name), {in, out}, ParamGroup::encoder, true,
                ParamInit::truncated_normal, 0.02});
  };
  const auto vec = [&](std::string name, std::size_t n, ParamInit init) {
    params.add({std::move(name), {n}, ParamGroup::encoder, false, init, 0.02});
  };
  vec("encoder.cls_token", d, ParamInit::truncated_normal);
  for (Ordering o : orderings) {
    params.add({positional_table_name(o), {num_patches + 1, d}, ParamGroup::encoder, false,
                ParamInit::truncated_normal, 0.02});
  }
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::string b = "encoder.blocks." + std::to_string(i) + ".";
    vec(b + "norm1.weight", d, ParamInit::ones);
    vec(b + "norm1.bias", d, ParamInit::zeros);
    weight(b + "attn.qkv.weight", d, 3 * d);
    vec(b + "attn.qkv.bias", 3 * d, ParamInit::zeros);
    weight(b + "attn.proj.weight", d, d);
    vec(b + "attn.proj.bias", d, ParamInit::zeros);
    vec(b + "norm2.weight", d, ParamInit::ones);
    vec(b + "norm2.bias", d, ParamInit::zeros);
    weight(b + "mlp.fc1.weight", d, kMlpRatio * d);
    vec(b + "mlp.fc1.bias", kMlpRatio * d, ParamInit::zeros);
    weight(b + "mlp.fc2.weight", kMlpRatio * d, d);
    vec(b + "mlp.fc2.bias", d, ParamInit::zeros);
  }
  vec("encoder.norm.weight", d, ParamInit::ones);
  vec("encoder.norm.bias", d, ParamInit::zeros);
  weight("encoder.head.weight", d, config.clip_dim);
}

std::size_t count_positional_tables(const ParamSet& params) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.spec(i).name.starts_with("encoder.pos_embed.")) ++n;
  }
  return n;
}

Vector encoder_forward(const Matrix& tokens, std::span<const Ordering> orderings,
                       std::span<const std::vector<std::size_t>> permutations,
                       const ParamSet& params, const EncoderConfig& config,
                       EncoderCache* cache) {
  const auto d = static_cast<Eigen::Index>(config.width);
  if (tokens.cols() != d) {
    throw ArgumentError("encoder: token width " + std::to_string(tokens.cols()) +
                        " does not match encoder width " + std::to_string(config.width));
  }
  if (orderings.empty() || orderings.size() != permutations.size()) {
    throw ArgumentError("encoder: one permutation per ordering is required");
  }
  const Eigen::Index g = tokens.rows();
  const auto layout = EncoderLayout::bind(params, config.depth);
  if (cache) {
    cache->passes.clear();
    cache->num_tokens = static_cast<std::size_t>(g);
  }

  RowVector pooled = RowVector::Zero(d);
  for (std::size_t o = 0; o < orderings.size(); ++o) {
    const auto& perm = permutations[o];
    if (perm.size() != static_cast<std::size_t>(g)) {
      throw ArgumentError("encoder: permutation length does not match the token count");
    }
    const std::size_t table = params.index(positional_table_name(orderings[o]));
    const auto pos = params.matrix(table);
    if (pos.rows() != g + 1 || pos.cols() != d) {
      throw ShapeMismatchError("encoder: positional table '" + params.spec(table).name +
                               "' does not fit " + std::to_string(g) + " tokens");
    }

    Matrix x(g + 1, d);
    x.row(0) = params.matrix(layout.cls).row(0);
    for (Eigen::Index r = 0; r < g; ++r) {
      x.row(r + 1) = tokens.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(r)]));
    }
    x += pos;

    OrderingPass pass;
    pass.table = table;
    pass.permutation = perm;
    if (cache) pass.blocks.resize(config.depth);
    for (std::size_t l = 0; l < config.depth; ++l) {
      x = block_forward(x, layout.blocks[l], params, config.heads,
                        cache ? &pass.blocks[l] : nullptr);
      check_finite(x, l);
    }
    const Matrix cls = x.topRows(1);
    const Matrix out = layer_norm(cls, params.matrix(layout.norm_w),
                                  params.matrix(layout.norm_b), cache ? &pass.final_ln : nullptr);
    pooled += out.row(0);
    if (cache) cache->passes.push_back(std::move(pass));
  }
  pooled /= static_cast<double>(orderings.size());

  const RowVector projected = pooled * params.matrix(layout.head_w);
  const double norm = projected.norm();
  if (!std::isfinite(norm)) throw NumericError("non-finite encoder projection");
  if (norm == 0.0) throw NumericError("encoder projection is exactly zero; cannot normalize");
  const RowVector embedding = projected / norm;
  if (cache) {
    cache->pooled = pooled;
    cache->projected = projected;
    cache->embedding = embedding;
    cache->norm = norm;
  }
  return embedding.transpose();
}

Matrix encoder_backward(const EncoderCache& cache, const Vector& d_embedding,
                        const ParamSet& params, const EncoderConfig& config, ParamSet& grads) {
  if (cache.passes.empty()) {
    throw StateError("encoder backward called without a recorded forward pass");
  }
  const auto d = static_cast<Eigen::Index>(config.width);
  const auto g = static_cast<Eigen::Index>(cache.num_tokens);
  const auto layout = EncoderLayout::bind(params, config.depth);

  const RowVector de = d_embedding.transpose();
  const RowVector d_proj = (de - cache.embedding * cache.embedding.dot(de)) / cache.norm;
  grads.matrix(layout.head_w) += cache.pooled.transpose() * d_proj;
  const RowVector d_pooled =
      (d_proj * params.matrix(layout.head_w).transpose()) / static_cast<double>(cache.passes.size());

  Matrix d_tokens = Matrix::Zero(g, d);
  for (const OrderingPass& pass : cache.passes) {
    Matrix d_x = Matrix::Zero(g + 1, d);
    d_x.row(0) = layer_norm_backward(d_pooled, pass.final_ln, params.matrix(layout.norm_w),
                                     grads.matrix(layout.norm_w), grads.matrix(layout.norm_b));
    for (std::size_t l = config.depth; l-- > 0;) {
      d_x = block_backward(d_x, pass.blocks[l], layout.blocks[l], params, config.heads, grads);
    }
    grads.matrix(pass.table) += d_x;
    grads.matrix(layout.cls).row(0) += d_x.row(0);
    for (Eigen::Index r = 0; r < g; ++r) {
      d_tokens.row(static_cast<Eigen::Index>(pass.permutation[static_cast<std::size_t>(r)])) +=
          d_x.row(r + 1);
    }
  }
  return d_tokens;
}

}  // namespace splatalign
