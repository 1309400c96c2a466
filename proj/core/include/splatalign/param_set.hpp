#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "splatalign/rng.hpp"
#include "splatalign/tensor.hpp"

namespace splatalign {

// Which optimizer group a tensor belongs to. Buffers (BN running stats) are
// stored and checkpointed but never receive gradients.
enum class ParamGroup { tokenizer, encoder, temperature, buffer };

enum class ParamInit { zeros, ones, truncated_normal };

struct TensorSpec {
  std::string name;
  std::vector<std::size_t> shape;
  ParamGroup group = ParamGroup::encoder;
  bool decay = false;  // receives decoupled weight decay
  ParamInit init = ParamInit::zeros;
  double init_std = 0.02;

  std::size_t numel() const;
};

// A flat, ordered collection of named double tensors. The model, its
// gradients and the optimizer moments are all ParamSets with identical
// layouts, which keeps checkpointing and updates generic.
class ParamSet {
 public:
  std::size_t add(TensorSpec spec);

  std::size_t size() const { return specs_.size(); }
  const TensorSpec& spec(std::size_t i) const { return specs_.at(i); }
  std::optional<std::size_t> find(std::string_view name) const;
  // Throws SchemaError if absent.
  std::size_t index(std::string_view name) const;

  std::span<double> values(std::size_t i) { return values_.at(i); }
  std::span<const double> values(std::size_t i) const { return values_.at(i); }

  // Rank-1 tensors map to a single row.
  MatrixMap matrix(std::size_t i);
  ConstMatrixMap matrix(std::size_t i) const;

  ParamSet zeros_like() const;
  void set_zero();
  void initialize(Rng& rng);
  // Re-initializes only the tensors for which `pred(spec)` holds.
  template <typename Pred>
  void initialize_if(Rng& rng, Pred pred) {
    for (std::size_t i = 0; i < size(); ++i) {
      if (pred(specs_[i])) initialize_tensor(i, rng);
    }
  }

  // this += scale * other (layouts must match).
  void add_scaled(const ParamSet& other, double scale);
  // Rounds every value to the nearest float (32-bit storage mode).
  void round_to_float();
  bool all_finite() const;
  std::size_t total_numel(bool trainable_only = false) const;

 private:
  void initialize_tensor(std::size_t i, Rng& rng);

  std::vector<TensorSpec> specs_;
  std::vector<std::vector<double>> values_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

}  // namespace splatalign
