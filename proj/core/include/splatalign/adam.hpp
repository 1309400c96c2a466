#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splatalign/checkpoint.hpp"
#include "splatalign/param_set.hpp"

namespace splatalign {

struct AdamConfig {
  double lr_tokenizer = 5e-4;
  double lr_other = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;

  void validate() const;
  double lr_for(ParamGroup group) const {
    return group == ParamGroup::tokenizer ? lr_tokenizer : lr_other;
  }
};

// Adam with decoupled weight decay. Decay applies only to tensors whose
// spec carries decay=true; buffers are never touched.
class AdamW {
 public:
  AdamW(const ParamSet& layout, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return step_; }

  void step(ParamSet& params, const ParamSet& grads);

  // Moments and step counter as checkpoint tensors under kOptimizerPrefix.
  std::vector<NamedTensor> export_state() const;
  // Restores state exported by a matching layout; unknown names are ignored.
  void import_state(std::span<const NamedTensor> tensors);

 private:
  AdamConfig config_;
  ParamSet m_;
  ParamSet v_;
  std::uint64_t step_ = 0;
};

}  // namespace splatalign
