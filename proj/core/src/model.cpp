#include "splatalign/model.hpp"

#include <cmath>

#include "splatalign/errors.hpp"
#include "splatalign/parallel.hpp"

namespace splatalign {

std::string_view numeric_mode_name(NumericMode m) {
  return m == NumericMode::f32 ? "f32" : "f64";
}

NumericMode parse_numeric_mode(std::string_view name) {
  if (name == "f32" || name == "32") return NumericMode::f32;
  if (name == "f64" || name == "64") return NumericMode::f64;
  throw ArgumentError("unknown numeric mode '" + std::string(name) + "' (expected f32 or f64)");
}

ModelConfig ModelConfig::from_preset(const std::string& preset, std::size_t clip_dim) {
  ModelConfig c;
  c.encoder = EncoderConfig::from_preset(preset, clip_dim);
  c.tokenizer.token_dim = c.encoder.width;
  return c;
}

void ModelConfig::validate() const {
  tokenizer.validate();
  encoder.validate();
  if (tokenizer.token_dim != encoder.width) {
    throw ArgumentError("token_dim " + std::to_string(tokenizer.token_dim) +
                        " must equal the encoder width " + std::to_string(encoder.width));
  }
  if (!(init_tau > 0.0) || !std::isfinite(init_tau)) {
    throw ArgumentError("init_tau must be positive");
  }
}

ParamSet make_param_set(const ModelConfig& config) {
  config.validate();
  ParamSet params;
  register_tokenizer_params(params, config.tokenizer);
  register_encoder_params(params, config.encoder, config.tokenizer.orderings,
                          config.tokenizer.num_patches);
  params.add({kLogTauName, {1}, ParamGroup::temperature, false, ParamInit::zeros, 0.0});
  return params;
}

Model::Model(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), params_(make_param_set(config_)) {
  Rng rng(seed, "init");
  params_.initialize(rng);
  params_.values(params_.index(kLogTauName))[0] = std::log(config_.init_tau);
  apply_storage_precision();
}

double Model::log_tau() const { return params_.values(params_.index(kLogTauName))[0]; }

double Model::tau() const { return std::exp(log_tau()); }

void Model::apply_storage_precision() {
  if (config_.numeric == NumericMode::f32) params_.round_to_float();
}

std::vector<Vector> Model::forward(std::span<const PreparedPatches* const> batch, Mode mode,
                                   std::size_t threads) {
  if (batch.empty()) throw ArgumentError("forward: empty batch");
  const std::size_t n = config_.tokenizer.neighbors;
  const std::size_t g = config_.tokenizer.num_patches;

  std::vector<std::size_t> offsets;
  Matrix features(static_cast<Eigen::Index>(batch.size() * g * n),
                  static_cast<Eigen::Index>(kPatchFeatures));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const PatchSet& ps = batch[b]->patches;
    if (ps.num_patches != g || ps.neighbors != n) {
      throw ArgumentError("forward: patch set shape does not match the tokenizer config");
    }
    if (batch[b]->permutations.size() != config_.tokenizer.orderings.size()) {
      throw ArgumentError("forward: prepared patches carry the wrong number of orderings");
    }
    offsets.push_back(b * g);
    features.middleRows(static_cast<Eigen::Index>(b * g * n), static_cast<Eigen::Index>(g * n)) =
        ps.features;
  }

  Tape tape;
  const bool record = mode == Mode::train;
  const RefineResult refined =
      refine_forward(features, n, params_, mode, record ? &tape.refine : nullptr);

  std::vector<Vector> out(batch.size());
  if (record) tape.encoders.resize(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t b) {
    const Matrix tokens =
        refined.tokens.middleRows(static_cast<Eigen::Index>(b * g), static_cast<Eigen::Index>(g));
    out[b] = encoder_forward(tokens, config_.tokenizer.orderings, batch[b]->permutations,
                             params_, config_.encoder, record ? &tape.encoders[b] : nullptr);
  });

  if (record) {
    tape.offsets = std::move(offsets);
    tape_ = std::move(tape);
  }
  return out;
}

ParamSet Model::backward(std::span<const Vector> d_embeddings, std::size_t threads) {
  if (!tape_) throw StateError("backward called without a train-mode forward pass");
  Tape tape = std::move(*tape_);
  tape_.reset();
  if (d_embeddings.size() != tape.encoders.size()) {
    throw ArgumentError("backward: expected one embedding gradient per batch element");
  }
  const std::size_t g = config_.tokenizer.num_patches;
  const auto d = static_cast<Eigen::Index>(config_.encoder.width);

  // Per-element gradient buffers, reduced in index order for determinism.
  std::vector<ParamSet> partial(d_embeddings.size());
  Matrix d_tokens(static_cast<Eigen::Index>(d_embeddings.size() * g), d);
  parallel_for(d_embeddings.size(), threads, [&](std::size_t b) {
    partial[b] = params_.zeros_like();
    d_tokens.middleRows(static_cast<Eigen::Index>(b * g), static_cast<Eigen::Index>(g)) =
        encoder_backward(tape.encoders[b], d_embeddings[b], params_, config_.encoder, partial[b]);
  });

  ParamSet grads = params_.zeros_like();
  for (const ParamSet& p : partial) grads.add_scaled(p, 1.0);
  refine_backward(tape.refine, d_tokens, params_, grads);

  RefineCache stats;
  stats.rows = tape.refine.rows;
  stats.bn1 = std::move(tape.refine.bn1);
  stats.bn2 = std::move(tape.refine.bn2);
  pending_stats_ = std::move(stats);
  return grads;
}

void Model::commit_running_stats() {
  if (tape_) {
    splatalign::commit_running_stats(tape_->refine, params_);
    return;
  }
  if (!pending_stats_) throw StateError("no train-mode batch statistics to commit");
  splatalign::commit_running_stats(*pending_stats_, params_);
  pending_stats_.reset();
}

Vector Model::embed(const PreparedPatches& prepared) const {
  const Matrix tokens = refine_patches(prepared.patches, params_);
  return encoder_forward(tokens, config_.tokenizer.orderings, prepared.permutations, params_,
                         config_.encoder);
}

Vector Model::embed_cloud(const GaussianCloud& cloud, std::uint64_t seed) const {
  const GaussianCloud sampled = subsample_points(cloud, config_.tokenizer.points, seed);
  return embed(prepare_patches(sampled, config_.tokenizer));
}

std::uint64_t object_point_seed(std::uint64_t seed, const std::string& object_key) {
  return derive_seed(seed, "points:" + object_key);
}

}  // namespace splatalign
