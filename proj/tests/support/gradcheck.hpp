#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "splatalign/loss.hpp"
#include "splatalign/model.hpp"
#include "splatalign/rng.hpp"
#include "splatalign/tokenizer.hpp"
#include "test_support.hpp"

namespace splatalign::testing {

// Batch of clouds with fixed teacher targets; the model embeds the clouds in
// train mode and total_loss closes the graph.
struct GradProblem {
  std::vector<PreparedPatches> prepared;
  LossBatch targets;  // gaussian is filled per evaluation
  LossOptions options;

  std::vector<const PreparedPatches*> inputs() const {
    std::vector<const PreparedPatches*> out;
    for (const auto& p : prepared) out.push_back(&p);
    return out;
  }
};

inline Vector unit_random(std::size_t dim, Rng& rng) {
  Vector v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = rng.normal();
  return v / v.norm();
}

inline GradProblem make_grad_problem(const ModelConfig& config, std::size_t batch, std::size_t views,
                                     std::uint64_t seed) {
  GradProblem p;
  Rng rng(seed, "grad-problem");
  const std::size_t dim = config.encoder.clip_dim;
  for (std::size_t i = 0; i < batch; ++i) {
    const auto cloud = random_cloud(config.tokenizer.points, seed * 1000 + i);
    p.prepared.push_back(prepare_patches(cloud, config.tokenizer, seed));
  }
  const auto n = static_cast<Eigen::Index>(batch);
  p.targets.text.resize(n, static_cast<Eigen::Index>(dim));
  p.targets.views.assign(views, Matrix(n, static_cast<Eigen::Index>(dim)));
  for (Eigen::Index i = 0; i < n; ++i) {
    p.targets.text.row(i) = unit_random(dim, rng).transpose();
    for (auto& v : p.targets.views) v.row(i) = unit_random(dim, rng).transpose();
  }
  return p;
}

// Moves every trainable tensor away from its tiny initial scale so each path
// carries a gradient well above finite-difference round-off.
inline void jitter_params(Model& model, std::uint64_t seed, double scale = 0.1) {
  Rng rng(seed, "jitter");
  ParamSet& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.spec(i).group == ParamGroup::buffer || p.spec(i).name == kLogTauName) continue;
    for (double& v : p.values(i)) v += scale * rng.normal();
  }
}

inline double problem_loss(Model& model, const GradProblem& problem, LossGradients* grads = nullptr) {
  const auto inputs = problem.inputs();
  const auto emb = model.forward(inputs, Mode::train);
  LossBatch batch = problem.targets;
  batch.gaussian.resize(static_cast<Eigen::Index>(emb.size()), batch.text.cols());
  for (std::size_t i = 0; i < emb.size(); ++i) batch.gaussian.row(static_cast<Eigen::Index>(i)) = emb[i].transpose();
  return total_loss(batch, model.log_tau(), problem.options, grads).total;
}

inline ParamSet analytic_gradients(Model& model, const GradProblem& problem) {
  LossGradients lg;
  problem_loss(model, problem, &lg);
  std::vector<Vector> d;
  for (Eigen::Index i = 0; i < lg.d_gaussian.rows(); ++i) d.push_back(lg.d_gaussian.row(i).transpose());
  ParamSet g = model.backward(d);
  g.values(g.index(kLogTauName))[0] = lg.d_log_tau;
  return g;
}

struct TensorCheck {
  std::string name;
  std::size_t probes = 0;
  std::size_t kinks = 0;   // candidates rejected for straddling a ReLU/max-pool switch
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double analytic_norm = 0.0;
};

// Central differences on `probes` random entries of every non-buffer tensor.
// A central difference is only an oracle where the loss is smooth on
// [x - step, x + step]; a candidate whose estimates at step and step/2
// disagree by more than `kink_tol` (relative) straddles a kink and is
// replaced by the next random entry.
inline std::vector<TensorCheck> check_gradients(Model& model, const GradProblem& problem,
                                                std::size_t probes, double step, std::uint64_t seed,
                                                double kink_tol = 1e-7) {
  const ParamSet grads = analytic_gradients(model, problem);
  Rng rng(seed, "probes");
  std::vector<TensorCheck> out;
  ParamSet& p = model.params();
  auto central = [&](std::span<double> values, std::size_t j, double h) {
    const double saved = values[j];
    values[j] = saved + h;
    const double up = problem_loss(model, problem);
    values[j] = saved - h;
    const double down = problem_loss(model, problem);
    values[j] = saved;
    return (up - down) / (2.0 * h);
  };
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p.spec(t).group == ParamGroup::buffer) continue;
    const auto values = p.values(t);
    std::vector<std::size_t> order(values.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    for (std::size_t j = 0; j + 1 < order.size(); ++j) {
      std::swap(order[j], order[j + rng.below(order.size() - j)]);
    }
    TensorCheck c;
    c.name = p.spec(t).name;
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t j : order) {
      if (c.probes == probes) break;
      const double numeric = central(values, j, step);
      const double half = central(values, j, 0.5 * step);
      if (std::abs(numeric - half) > kink_tol * std::max(std::abs(numeric), 1e-12)) {
        ++c.kinks;
        continue;
      }
      const double analytic = grads.values(t)[j];
      diff += (analytic - numeric) * (analytic - numeric);
      na += analytic * analytic;
      nn += numeric * numeric;
      ++c.probes;
    }
    const double denom = std::max(std::sqrt(na), std::sqrt(nn));
    c.rel_error = denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
    c.analytic_norm = std::sqrt(na);
    out.push_back(c);
  }
  return out;
}

}  // namespace splatalign::testing
