#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "splatalign/tensor.hpp"

namespace splatalign {

// voting: per-view softmax-of-cosine weights on per-view image terms.
// eq4_literal: one raw mean-cosine score per object scaling the text terms.
enum class LossVariant { voting, eq4_literal };

std::string_view loss_variant_name(LossVariant v);
LossVariant parse_loss_variant(std::string_view name);

// Rows are objects. views[k].row(i) is the k-th sampled view of object i.
struct LossBatch {
  Matrix gaussian;
  Matrix text;
  std::vector<Matrix> views;

  std::size_t size() const { return static_cast<std::size_t>(gaussian.rows()); }
  // Throws DimensionMismatchError / ArgumentError / NumericError.
  void validate() const;
};

struct LossOptions {
  LossVariant variant = LossVariant::voting;
  bool image_term = true;
};

struct LossBreakdown {
  double l_text = 0.0;
  double l_img = 0.0;
  double total = 0.0;
  double tau = 0.0;
  Matrix votes;  // N x K; raw cosines for eq4_literal
};

struct LossGradients {
  Matrix d_gaussian;  // N x dim
  double d_log_tau = 0.0;
};

// log softmax of the matching pair: element i = log(exp(a_i.b_i/t) / sum_j exp(a_i.b_j/t)).
Vector contra(const Matrix& a, const Matrix& b, double tau);

double loss_text(const Matrix& gaussian, const Matrix& text, double tau);

// Raw cosine similarity between the text row and each view row.
Vector view_cosines(const RowVector& text, const Matrix& views);
// Softmax (temperature 1) over the raw cosines.
Vector voting_scores(const RowVector& text, const Matrix& views);
Matrix voting_weights(const LossBatch& batch);

double loss_img(const LossBatch& batch, double tau, LossVariant variant = LossVariant::voting);

// Total objective. With `grads` the gradient with respect to the gaussian
// embeddings and to log(tau) is written as well.
LossBreakdown total_loss(const LossBatch& batch, double log_tau, const LossOptions& options = {},
                         LossGradients* grads = nullptr);

}  // namespace splatalign
