#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splatalign/param_set.hpp"
#include "splatalign/refine.hpp"
#include "splatalign/tokenizer.hpp"
#include "splatalign/transformer.hpp"

namespace splatalign {

// f32 keeps every parameter representable as a float (the checkpoint
// payload type) by rounding after initialization and each update; all
// arithmetic runs in double in both modes.
enum class NumericMode { f32, f64 };

std::string_view numeric_mode_name(NumericMode m);
NumericMode parse_numeric_mode(std::string_view name);

inline constexpr double kDefaultInitTau = 0.07;

struct ModelConfig {
  TokenizerConfig tokenizer;
  EncoderConfig encoder;
  NumericMode numeric = NumericMode::f32;
  double init_tau = kDefaultInitTau;

  // Builds a consistent config from a preset; token_dim follows the width.
  static ModelConfig from_preset(const std::string& preset, std::size_t clip_dim);
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr const char* kLogTauName = "loss.log_tau";

// Registers tokenizer, encoder and temperature tensors in a fixed order.
ParamSet make_param_set(const ModelConfig& config);

// The learnable 3DGS encoder: GS tokenizer + transformer + temperature.
// Evaluation (`embed`) is reentrant; a training forward records a tape that
// the next `backward` consumes, so one instance serves one training pass at
// a time.
class Model {
 public:
  explicit Model(ModelConfig config, std::uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  double log_tau() const;
  double tau() const;

  // Batched forward. In train mode BN uses batch statistics across every
  // patch in the batch and the intermediates are recorded for backward.
  std::vector<Vector> forward(std::span<const PreparedPatches* const> batch, Mode mode,
                              std::size_t threads = 1);

  // Gradients of all trainable tensors given d(loss)/d(embedding) per batch
  // element. The log_tau gradient is left for the caller (loss side).
  ParamSet backward(std::span<const Vector> d_embeddings, std::size_t threads = 1);

  // Folds the last train-mode batch statistics into the BN running stats.
  void commit_running_stats();

  bool has_tape() const { return tape_.has_value(); }

  Vector embed(const PreparedPatches& prepared) const;
  // Subsample (seeded) -> patches -> tokens -> embedding.
  Vector embed_cloud(const GaussianCloud& cloud, std::uint64_t seed) const;

  // Applies the numeric-mode storage rule to the current parameters.
  void apply_storage_precision();

 private:
  struct Tape {
    RefineCache refine;
    std::vector<EncoderCache> encoders;
    std::vector<std::size_t> offsets;  // first patch of each batch element
  };

  ModelConfig config_;
  ParamSet params_;
  std::optional<Tape> tape_;
  std::optional<RefineCache> pending_stats_;
};

// Seed used to subsample a cloud, derived from the run seed and a stable
// per-object key so train and eval agree on the points of an object.
std::uint64_t object_point_seed(std::uint64_t seed, const std::string& object_key);

}  // namespace splatalign
