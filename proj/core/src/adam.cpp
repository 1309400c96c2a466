#include "splatalign/adam.hpp"

#include <cmath>
#include <string>

#include "splatalign/errors.hpp"

namespace splatalign {

void AdamConfig::validate() const {
  if (!(lr_tokenizer > 0.0) || !(lr_other > 0.0)) {
    throw ArgumentError("learning rates must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ArgumentError("adam epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight decay must be >= 0");
}

AdamW::AdamW(const ParamSet& layout, AdamConfig config)
    : config_(config), m_(layout.zeros_like()), v_(layout.zeros_like()) {
  config_.validate();
}

void AdamW::step(ParamSet& params, const ParamSet& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeMismatchError("optimizer layout does not match the parameters");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const TensorSpec& spec = params.spec(i);
    if (spec.group == ParamGroup::buffer) continue;
    const double lr = config_.lr_for(spec.group);
    const double decay = spec.decay ? lr * config_.weight_decay : 0.0;
    auto p = params.values(i);
    auto g = grads.values(i);
    auto m = m_.values(i);
    auto v = v_.values(i);
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= decay * p[j];
      p[j] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

std::vector<NamedTensor> AdamW::export_state() const {
  const std::string prefix(kOptimizerPrefix);
  std::vector<NamedTensor> out = export_tensors(m_, prefix + "m/");
  std::vector<NamedTensor> v = export_tensors(v_, prefix + "v/");
  out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  out.push_back(NamedTensor{prefix + "step", {1}, {static_cast<float>(step_)}});
  return out;
}

void AdamW::import_state(std::span<const NamedTensor> tensors) {
  const std::string prefix(kOptimizerPrefix);
  for (const NamedTensor& t : tensors) {
    if (t.name == prefix + "step") {
      if (t.values.size() != 1) throw ShapeMismatchError("tensor '" + t.name + "' must hold one value");
      step_ = static_cast<std::uint64_t>(t.values[0]);
      continue;
    }
    ParamSet* target = nullptr;
    std::string name;
    if (t.name.starts_with(prefix + "m/")) {
      target = &m_;
      name = t.name.substr(prefix.size() + 2);
    } else if (t.name.starts_with(prefix + "v/")) {
      target = &v_;
      name = t.name.substr(prefix.size() + 2);
    } else {
      continue;
    }
    const auto idx = target->find(name);
    if (!idx) continue;
    auto dst = target->values(*idx);
    if (dst.size() != t.values.size()) {
      throw ShapeMismatchError("tensor '" + t.name + "' does not match the optimizer layout");
    }
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = t.values[j];
  }
}

}  // namespace splatalign
