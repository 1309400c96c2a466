#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splatalign/curves.hpp"
#include "splatalign/model.hpp"
#include "splatalign/trainer.hpp"

namespace splatalign::cli {

// Everything a train/eval/ablate run depends on. Serialized into every
// artifact so a run can be reproduced from its outputs.
struct RunConfig {
  std::string preset = "nano";
  std::vector<Ordering> orderings{Ordering::xyz, Ordering::hilbert, Ordering::z_order};
  std::size_t points = 1024;
  std::size_t patches = 64;
  std::size_t neighbors = 16;
  unsigned quant_bits = 10;
  NumericMode numeric = NumericMode::f32;
  TrainConfig train;

  std::string manifest;
  std::string text;
  std::string images;
  std::string classes;
  std::string eval_manifest;  // ablate only; defaults to manifest
  std::string checkpoint;     // train: output, eval: input
  std::string log;
  std::string out;            // report path prefix

  bool retrieval = true;
  bool zero_shot = false;
  std::optional<std::pair<std::size_t, std::size_t>> few_shot;  // n-way, m-shot
  std::size_t runs = 5;
  std::uint64_t eval_seed = 0;

  std::string to_json() const;
  // Missing keys keep their defaults; unknown keys are a SchemaError.
  static RunConfig from_json(const std::string& text);
  ModelConfig model_config(std::size_t clip_dim) const;
};

// "5x5" -> (5, 5).
std::pair<std::size_t, std::size_t> parse_few_shot(const std::string& text);

// args excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace splatalign::cli
