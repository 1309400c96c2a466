#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "splatalign/model.hpp"

namespace splatalign {

inline constexpr std::uint32_t kCheckpointVersion = 1;
// Optimizer state and other non-model tensors share this name prefix.
inline constexpr std::string_view kOptimizerPrefix = "optim/";

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

// On-disk layout (little-endian):
//   "GSCK" | version u32 | config length u32 | config JSON bytes
//   | tensor count u32 | per tensor: name length u16, name, rank u8,
//   dims u32 x rank, f32 payload
struct CheckpointFile {
  std::uint32_t version = kCheckpointVersion;
  std::string config_json;
  std::vector<NamedTensor> tensors;
};

std::vector<std::byte> encode_checkpoint(const CheckpointFile& file);
// ParseError (magic), VersionError, SizeMismatchError (truncation/trailing).
CheckpointFile decode_checkpoint(std::span<const std::byte> bytes);
CheckpointFile read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& json);

// Wraps the model config and an optional run-config echo into the blob.
std::string checkpoint_config_json(const ModelConfig& config, const std::string& run_json = {});

std::vector<NamedTensor> export_tensors(const ParamSet& params, std::string_view prefix = {});

void save_params(const Model& model, const std::filesystem::path& path,
                 std::span<const NamedTensor> extra = {}, const std::string& run_json = {});

struct LoadReport {
  std::vector<std::string> warnings;
  std::vector<NamedTensor> extra;  // tensors under kOptimizerPrefix
  std::string config_json;
};

// Rebuilds a model from a checkpoint. With `expected` the checkpoint must
// match that config's tensor shapes (ShapeMismatchError names the first
// offending tensor); otherwise the embedded config is used. Missing
// tokenizer tensors are freshly initialized from `init_seed` and reported
// as a warning; any other missing tensor is a SchemaError.
Model load_params(const std::filesystem::path& path, const ModelConfig* expected = nullptr,
                  LoadReport* report = nullptr, std::uint64_t init_seed = 0);
Model load_params(const CheckpointFile& file, const ModelConfig* expected = nullptr,
                  LoadReport* report = nullptr, std::uint64_t init_seed = 0);

}  // namespace splatalign
