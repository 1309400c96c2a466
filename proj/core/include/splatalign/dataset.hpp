#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splatalign/embeddings.hpp"
#include "splatalign/fixtures.hpp"
#include "splatalign/gaussian.hpp"
#include "splatalign/manifest.hpp"
#include "splatalign/model.hpp"

namespace splatalign {

// Manifest entries with their clouds loaded and their teacher rows checked.
struct TripletDataset {
  TripletManifest manifest;
  std::vector<GaussianCloud> clouds;  // aligned with manifest.entries
  EmbeddingTable text;
  EmbeddingTable images;

  std::size_t size() const { return manifest.entries.size(); }
  // Stable per-object key (the text key) used to derive sampling seeds.
  const std::string& object_key(std::size_t i) const { return manifest.entries.at(i).text_key; }
};

TripletDataset load_dataset(const std::filesystem::path& manifest_path,
                            const std::filesystem::path& text_path,
                            const std::filesystem::path& images_path);

TripletDataset dataset_from_synthetic(const SyntheticData& data,
                                      const std::vector<std::size_t>& indices);

// Eval-mode embeddings of every object, subsampled with object_point_seed.
std::vector<Vector> embed_dataset(const Model& model, const TripletDataset& data,
                                  std::uint64_t seed, std::size_t threads = 1);

}  // namespace splatalign
