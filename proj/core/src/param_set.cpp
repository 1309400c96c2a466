#include "splatalign/param_set.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "splatalign/errors.hpp"

namespace splatalign {

std::size_t TensorSpec::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::size_t ParamSet::add(TensorSpec spec) {
  if (by_name_.contains(spec.name)) {
    throw DuplicateKeyError("tensor '" + spec.name + "' registered twice");
  }
  if (spec.shape.empty() || spec.shape.size() > 2) {
    throw ArgumentError("tensor '" + spec.name + "' must have rank 1 or 2");
  }
  const std::size_t i = specs_.size();
  by_name_.emplace(spec.name, i);
  values_.emplace_back(spec.numel(), 0.0);
  specs_.push_back(std::move(spec));
  return i;
}

std::optional<std::size_t> ParamSet::find(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParamSet::index(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw SchemaError("no tensor named '" + std::string(name) + "'");
}

MatrixMap ParamSet::matrix(std::size_t i) {
  const auto& s = specs_.at(i);
  const auto rows = s.shape.size() == 1 ? Eigen::Index{1} : static_cast<Eigen::Index>(s.shape[0]);
  const auto cols = static_cast<Eigen::Index>(s.shape.back());
  return MatrixMap(values_[i].data(), rows, cols);
}

ConstMatrixMap ParamSet::matrix(std::size_t i) const {
  const auto& s = specs_.at(i);
  const auto rows = s.shape.size() == 1 ? Eigen::Index{1} : static_cast<Eigen::Index>(s.shape[0]);
  const auto cols = static_cast<Eigen::Index>(s.shape.back());
  return ConstMatrixMap(values_[i].data(), rows, cols);
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  out.specs_ = specs_;
  out.by_name_ = by_name_;
  out.values_.reserve(values_.size());
  for (const auto& v : values_) out.values_.emplace_back(v.size(), 0.0);
  return out;
}

void ParamSet::set_zero() {
  for (auto& v : values_) std::fill(v.begin(), v.end(), 0.0);
}

void ParamSet::initialize_tensor(std::size_t i, Rng& rng) {
  auto& v = values_[i];
  switch (specs_[i].init) {
    case ParamInit::zeros:
      std::fill(v.begin(), v.end(), 0.0);
      break;
    case ParamInit::ones:
      std::fill(v.begin(), v.end(), 1.0);
      break;
    case ParamInit::truncated_normal:
      for (double& x : v) x = rng.truncated_normal(specs_[i].init_std);
      break;
  }
}

void ParamSet::initialize(Rng& rng) {
  for (std::size_t i = 0; i < size(); ++i) initialize_tensor(i, rng);
}

void ParamSet::add_scaled(const ParamSet& other, double scale) {
  if (other.size() != size()) throw ShapeMismatchError("ParamSet layouts differ");
  for (std::size_t i = 0; i < size(); ++i) {
    if (other.values_[i].size() != values_[i].size()) {
      throw ShapeMismatchError("tensor '" + specs_[i].name + "' sizes differ");
    }
    for (std::size_t k = 0; k < values_[i].size(); ++k) {
      values_[i][k] += scale * other.values_[i][k];
    }
  }
}

void ParamSet::round_to_float() {
  for (auto& v : values_) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  }
}

bool ParamSet::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](const auto& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  });
}

std::size_t ParamSet::total_numel(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& s : specs_) {
    if (trainable_only && s.group == ParamGroup::buffer) continue;
    n += s.numel();
  }
  return n;
}

}  // namespace splatalign
