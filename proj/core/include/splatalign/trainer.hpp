#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splatalign/adam.hpp"
#include "splatalign/dataset.hpp"
#include "splatalign/loss.hpp"
#include "splatalign/model.hpp"

namespace splatalign {

struct TrainConfig {
  std::size_t epochs = 5;
  std::optional<std::size_t> max_steps;  // overrides epochs when set
  std::size_t batch = 16;
  std::size_t views = 5;  // K
  std::uint64_t seed = 1;
  AdamConfig adam;
  LossOptions loss;
  std::size_t threads = 1;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based
  LossBreakdown loss;
  double lr = 0.0;
  double lr_tokenizer = 0.0;
  LossVariant variant = LossVariant::voting;
  std::vector<std::size_t> objects;
};

// One JSON-lines record: {step, l_text, l_img, total, tau, lr, lr_tokenizer, variant}.
std::string step_record_json(const StepRecord& record);

class Trainer {
 public:
  // Precomputes patches for every object; `data` must outlive the trainer.
  Trainer(Model& model, const TripletDataset& data, TrainConfig config);

  std::size_t steps_per_epoch() const;
  std::size_t total_steps() const;
  std::size_t steps_done() const { return step_; }

  // Next batch of the epoch schedule (reshuffled at every epoch boundary).
  StepRecord step();
  // One optimizer step on explicit, distinct object indices.
  StepRecord step_on(std::span<const std::size_t> objects);
  std::vector<StepRecord> run(const std::function<void(const StepRecord&)>& on_step = {});

  AdamW& optimizer() { return optimizer_; }
  const AdamW& optimizer() const { return optimizer_; }

 private:
  std::vector<std::size_t> sample_views(std::size_t object, Rng& rng) const;

  Model& model_;
  const TripletDataset& data_;
  TrainConfig config_;
  AdamW optimizer_;
  std::vector<PreparedPatches> prepared_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
};

}  // namespace splatalign
