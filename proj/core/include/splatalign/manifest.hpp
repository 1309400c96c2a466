#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "splatalign/embeddings.hpp"

namespace splatalign {

struct ManifestEntry {
  std::string asset;  // as written in the file, relative to the manifest
  std::string text_key;
  std::vector<std::string> image_keys;
  std::optional<std::string> label;

  bool operator==(const ManifestEntry&) const = default;
};

// JSON: {"dim": int, "entries": [{"asset", "text_key", "image_keys", "label"}]}
struct TripletManifest {
  std::size_t dim = 0;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // directory relative asset paths resolve against

  std::filesystem::path asset_path(std::size_t i) const;
};

// Parses and checks structure: every entry has >= 1 image key, text keys
// are unique and every asset file exists.
TripletManifest load_manifest(const std::filesystem::path& path);
TripletManifest parse_manifest(const std::string& json_text, std::filesystem::path base_dir);
std::string manifest_to_json(const TripletManifest& manifest);
void save_manifest(const TripletManifest& manifest, const std::filesystem::path& path);

// Checks every key of the manifest against the tables and that all
// dimensions agree. Throws DanglingKeyError / DimensionMismatchError.
void resolve_manifest(const TripletManifest& manifest, const EmbeddingTable& text,
                      const EmbeddingTable& images);

}  // namespace splatalign
