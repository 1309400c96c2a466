#include "splatalign/trainer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "json.hpp"
#include "splatalign/errors.hpp"
#include "splatalign/parallel.hpp"

namespace splatalign {

void TrainConfig::validate() const {
  if (batch < 1) throw ArgumentError("batch size must be >= 1");
  if (views < 1) throw ArgumentError("views per object (K) must be >= 1");
  if (!max_steps && epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (max_steps && *max_steps < 1) throw ArgumentError("steps must be >= 1");
  adam.validate();
}

std::string step_record_json(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["l_text"] = r.loss.l_text;
  j["l_img"] = r.loss.l_img;
  j["total"] = r.loss.total;
  j["tau"] = r.loss.tau;
  j["lr"] = r.lr;
  j["lr_tokenizer"] = r.lr_tokenizer;
  j["variant"] = std::string(loss_variant_name(r.variant));
  return j.dump();
}

Trainer::Trainer(Model& model, const TripletDataset& data, TrainConfig config)
    : model_(model), data_(data), config_(std::move(config)),
      optimizer_(model.params(), config_.adam) {
  config_.validate();
  if (data_.size() < 2) throw ArgumentError("training needs at least two objects");
  if (config_.batch > data_.size()) {
    throw ArgumentError("batch size " + std::to_string(config_.batch) + " exceeds the " +
                        std::to_string(data_.size()) + " training objects");
  }
  if (data_.text.dim() != model_.config().encoder.clip_dim) {
    throw DimensionMismatchError("teacher dimension " + std::to_string(data_.text.dim()) +
                                 " does not match the model output dimension " +
                                 std::to_string(model_.config().encoder.clip_dim));
  }
  prepared_.resize(data_.size());
  parallel_for(data_.size(), config_.threads, [&](std::size_t i) {
    const GaussianCloud sampled =
        subsample_points(data_.clouds[i], model_.config().tokenizer.points,
                         object_point_seed(config_.seed, data_.object_key(i)));
    prepared_[i] = prepare_patches(sampled, model_.config().tokenizer);
  });
}

std::size_t Trainer::steps_per_epoch() const { return data_.size() / config_.batch; }

std::size_t Trainer::total_steps() const {
  return config_.max_steps ? *config_.max_steps : config_.epochs * steps_per_epoch();
}

std::vector<std::size_t> Trainer::sample_views(std::size_t object, Rng& rng) const {
  const std::size_t avail = data_.manifest.entries[object].image_keys.size();
  const std::size_t k = config_.views;
  std::vector<std::size_t> out;
  if (avail >= k) {
    std::vector<std::size_t> pool(avail);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(avail - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) out.push_back(static_cast<std::size_t>(rng.below(avail)));
  }
  return out;
}

StepRecord Trainer::step() {
  if (cursor_ == 0 || cursor_ + config_.batch > order_.size()) {
    order_.resize(data_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(config_.seed, "batching", epoch_);
    for (std::size_t i = order_.size(); i > 1; --i) {
      std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng.below(i))]);
    }
    cursor_ = 0;
    ++epoch_;
  }
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + config_.batch));
  cursor_ += config_.batch;
  return step_on(batch);
}

StepRecord Trainer::step_on(std::span<const std::size_t> objects) {
  if (objects.empty()) throw ArgumentError("empty training batch");
  const std::size_t n = objects.size();
  const std::size_t dim = data_.text.dim();
  std::string ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (objects[i] >= data_.size()) throw ArgumentError("batch object index out of range");
    for (std::size_t j = 0; j < i; ++j) {
      if (objects[j] == objects[i]) throw ArgumentError("batch repeats object " + data_.object_key(objects[i]));
    }
    ids += (i ? "," : "") + data_.object_key(objects[i]);
  }
  const std::size_t step_index = step_ + 1;

  LossBatch batch;
  batch.text.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  batch.views.assign(config_.views, Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim)));
  Rng view_rng(config_.seed, "views", step_index);
  for (std::size_t i = 0; i < n; ++i) {
    const ManifestEntry& e = data_.manifest.entries[objects[i]];
    const auto r = static_cast<Eigen::Index>(i);
    batch.text.row(r) = data_.text.row_vector(e.text_key).transpose();
    const std::vector<std::size_t> picks = sample_views(objects[i], view_rng);
    for (std::size_t k = 0; k < picks.size(); ++k) {
      batch.views[k].row(r) = data_.images.row_vector(e.image_keys[picks[k]]).transpose();
    }
  }

  std::vector<const PreparedPatches*> inputs;
  for (std::size_t o : objects) inputs.push_back(&prepared_[o]);
  std::vector<Vector> embeddings;
  try {
    embeddings = model_.forward(inputs, Mode::train, config_.threads);
  } catch (const NumericError& e) {
    throw NumericError("step " + std::to_string(step_index) + " aborted for objects [" + ids +
                       "]: " + e.what());
  }
  batch.gaussian.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) batch.gaussian.row(static_cast<Eigen::Index>(i)) = embeddings[i].transpose();

  LossGradients lg;
  LossBreakdown loss;
  try {
    loss = total_loss(batch, model_.log_tau(), config_.loss, &lg);
  } catch (const NumericError& e) {
    throw NumericError("step " + std::to_string(step_index) + " aborted for objects [" + ids +
                       "]: " + e.what());
  }
  if (!std::isfinite(loss.total) || !lg.d_gaussian.allFinite() || !std::isfinite(lg.d_log_tau)) {
    throw NumericError("non-finite loss at step " + std::to_string(step_index) +
                       " for objects [" + ids + "]");
  }

  std::vector<Vector> d_emb(n);
  for (std::size_t i = 0; i < n; ++i) d_emb[i] = lg.d_gaussian.row(static_cast<Eigen::Index>(i)).transpose();
  ParamSet grads = model_.backward(d_emb, config_.threads);
  grads.values(grads.index(kLogTauName))[0] = lg.d_log_tau;
  if (!grads.all_finite()) {
    throw NumericError("non-finite gradient at step " + std::to_string(step_index) +
                       " for objects [" + ids + "]");
  }
  model_.commit_running_stats();
  optimizer_.step(model_.params(), grads);
  model_.apply_storage_precision();
  step_ = step_index;

  StepRecord rec;
  rec.step = step_index;
  rec.loss = std::move(loss);
  rec.lr = config_.adam.lr_other;
  rec.lr_tokenizer = config_.adam.lr_tokenizer;
  rec.variant = config_.loss.variant;
  rec.objects.assign(objects.begin(), objects.end());
  return rec;
}

std::vector<StepRecord> Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  std::vector<StepRecord> out;
  while (step_ < total_steps()) {
    out.push_back(step());
    if (on_step) on_step(out.back());
  }
  return out;
}

}  // namespace splatalign
