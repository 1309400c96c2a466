#include "splatalign/loss.hpp"

#include <cmath>
#include <string>

#include "splatalign/errors.hpp"

namespace splatalign {
namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

Matrix logits(const Matrix& a, const Matrix& b, double tau) { return (a * b.transpose()) / tau; }

// Row-wise softmax of s, plus the per-row contra value.
void softmax_rows(const Matrix& s, Matrix& p, Vector& out) {
  const Eigen::Index n = s.rows();
  p.resize(n, s.cols());
  out.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = s.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      p(i, j) = std::exp(s(i, j) - mx);
      sum += p(i, j);
    }
    p.row(i) /= sum;
    out(i) = (s(i, i) - mx) - std::log(sum);
  }
}

struct ContraTerm {
  Matrix s;
  Matrix p;
  Vector value;
};

ContraTerm contra_term(const Matrix& a, const Matrix& b, double tau) {
  ContraTerm t;
  t.s = logits(a, b, tau);
  softmax_rows(t.s, t.p, t.value);
  return t;
}

// Accumulates the gradient of sum_i c_i * contra(a, b)_i.
void contra_backward(const ContraTerm& t, const Vector& c, const Matrix& a, const Matrix& b,
                     double tau, Matrix* da, Matrix* db, double& d_log_tau) {
  Matrix g = -t.p;
  g.diagonal().array() += 1.0;
  g = c.asDiagonal() * g;
  if (da) *da += g * b / tau;
  if (db) *db += g.transpose() * a / tau;
  d_log_tau -= (g.array() * t.s.array()).sum();
}

double cosine(const RowVector& a, const RowVector& b) {
  const double denom = a.norm() * b.norm();
  if (denom == 0.0) throw NumericError("cosine of a zero vector");
  return a.dot(b) / denom;
}

}  // namespace

std::string_view loss_variant_name(LossVariant v) {
  return v == LossVariant::voting ? "voting" : "eq4_literal";
}

LossVariant parse_loss_variant(std::string_view name) {
  if (name == "voting") return LossVariant::voting;
  if (name == "eq4_literal") return LossVariant::eq4_literal;
  throw ArgumentError("unknown loss variant '" + std::string(name) + "'");
}

void LossBatch::validate() const {
  if (gaussian.rows() == 0) throw ArgumentError("loss batch is empty");
  if (text.rows() != gaussian.rows() || text.cols() != gaussian.cols()) {
    throw DimensionMismatchError("text embeddings do not match the gaussian embeddings' shape");
  }
  if (views.empty()) throw ArgumentError("loss batch needs at least one view per object");
  for (const Matrix& v : views) {
    if (v.rows() != gaussian.rows() || v.cols() != gaussian.cols()) {
      throw DimensionMismatchError("view embeddings do not match the gaussian embeddings' shape");
    }
    require_finite(v, "view embeddings");
  }
  require_finite(gaussian, "gaussian embeddings");
  require_finite(text, "text embeddings");
}

Vector contra(const Matrix& a, const Matrix& b, double tau) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatchError("contra operands differ in shape");
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) throw NumericError("temperature must be positive");
  require_finite(a, "contra input");
  require_finite(b, "contra input");
  return contra_term(a, b, tau).value;
}

double loss_text(const Matrix& gaussian, const Matrix& text, double tau) {
  const Vector a = contra(gaussian, text, tau);
  const Vector b = contra(text, gaussian, tau);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) sum += a(i) + b(i);
  return -sum / (2.0 * static_cast<double>(a.size()));
}

Vector view_cosines(const RowVector& text, const Matrix& views) {
  Vector out(views.rows());
  for (Eigen::Index k = 0; k < views.rows(); ++k) out(k) = cosine(text, views.row(k));
  return out;
}

Vector voting_scores(const RowVector& text, const Matrix& views) {
  const Vector raw = view_cosines(text, views);
  const double mx = raw.maxCoeff();
  Vector w = (raw.array() - mx).exp().matrix();
  return w / w.sum();
}

namespace {

Matrix gather_views(const LossBatch& batch, Eigen::Index i) {
  Matrix v(static_cast<Eigen::Index>(batch.views.size()), batch.gaussian.cols());
  for (std::size_t k = 0; k < batch.views.size(); ++k) {
    v.row(static_cast<Eigen::Index>(k)) = batch.views[k].row(i);
  }
  return v;
}

Matrix raw_cosines(const LossBatch& batch) {
  Matrix out(batch.gaussian.rows(), static_cast<Eigen::Index>(batch.views.size()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i) = view_cosines(batch.text.row(i), gather_views(batch, i)).transpose();
  }
  return out;
}

struct Evaluated {
  LossBreakdown breakdown;
  ContraTerm gt, tg;
  std::vector<ContraTerm> gv, vg;
};

Evaluated evaluate(const LossBatch& batch, double tau, const LossOptions& options) {
  batch.validate();
  if (!(tau > 0.0) || !std::isfinite(tau)) throw NumericError("temperature must be positive");
  Evaluated e;
  const Eigen::Index n = batch.gaussian.rows();
  const double scale = 2.0 * static_cast<double>(n);
  e.gt = contra_term(batch.gaussian, batch.text, tau);
  e.tg = contra_term(batch.text, batch.gaussian, tau);

  double text_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) text_sum += e.gt.value(i) + e.tg.value(i);
  e.breakdown.l_text = -text_sum / scale;

  double img_sum = 0.0;
  if (options.variant == LossVariant::voting) {
    e.breakdown.votes = voting_weights(batch);
    if (options.image_term) {
      for (const Matrix& v : batch.views) {
        e.gv.push_back(contra_term(batch.gaussian, v, tau));
        e.vg.push_back(contra_term(v, batch.gaussian, tau));
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < batch.views.size(); ++k) {
          img_sum += e.breakdown.votes(i, static_cast<Eigen::Index>(k)) *
                     (e.gv[k].value(i) + e.vg[k].value(i));
        }
      }
    }
  } else {
    e.breakdown.votes = raw_cosines(batch);
    if (options.image_term) {
      for (Eigen::Index i = 0; i < n; ++i) {
        img_sum += e.breakdown.votes.row(i).mean() * (e.gt.value(i) + e.tg.value(i));
      }
    }
  }
  e.breakdown.l_img = options.image_term ? -img_sum / scale : 0.0;
  e.breakdown.total = e.breakdown.l_text + e.breakdown.l_img;
  e.breakdown.tau = tau;
  return e;
}

}  // namespace

Matrix voting_weights(const LossBatch& batch) {
  Matrix out(batch.gaussian.rows(), static_cast<Eigen::Index>(batch.views.size()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i) = voting_scores(batch.text.row(i), gather_views(batch, i)).transpose();
  }
  return out;
}

double loss_img(const LossBatch& batch, double tau, LossVariant variant) {
  return evaluate(batch, tau, LossOptions{variant, true}).breakdown.l_img;
}

LossBreakdown total_loss(const LossBatch& batch, double log_tau, const LossOptions& options,
                         LossGradients* grads) {
  const double tau = std::exp(log_tau);
  Evaluated e = evaluate(batch, tau, options);
  if (!grads) return std::move(e.breakdown);

  const Eigen::Index n = batch.gaussian.rows();
  const double scale = -1.0 / (2.0 * static_cast<double>(n));
  grads->d_gaussian = Matrix::Zero(n, batch.gaussian.cols());
  grads->d_log_tau = 0.0;

  Vector text_coeff = Vector::Constant(n, scale);
  if (options.image_term && options.variant == LossVariant::eq4_literal) {
    for (Eigen::Index i = 0; i < n; ++i) {
      text_coeff(i) += scale * e.breakdown.votes.row(i).mean();
    }
  }
  contra_backward(e.gt, text_coeff, batch.gaussian, batch.text, tau, &grads->d_gaussian, nullptr,
                  grads->d_log_tau);
  contra_backward(e.tg, text_coeff, batch.text, batch.gaussian, tau, nullptr, &grads->d_gaussian,
                  grads->d_log_tau);

  if (options.image_term && options.variant == LossVariant::voting) {
    for (std::size_t k = 0; k < batch.views.size(); ++k) {
      const Vector c = scale * e.breakdown.votes.col(static_cast<Eigen::Index>(k));
      contra_backward(e.gv[k], c, batch.gaussian, batch.views[k], tau, &grads->d_gaussian,
                      nullptr, grads->d_log_tau);
      contra_backward(e.vg[k], c, batch.views[k], batch.gaussian, tau, nullptr,
                      &grads->d_gaussian, grads->d_log_tau);
    }
  }
  return std::move(e.breakdown);
}

}  // namespace splatalign
