#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "splatalign/embeddings.hpp"
#include "splatalign/gaussian.hpp"
#include "splatalign/manifest.hpp"

namespace splatalign {

struct FixtureConfig {
  std::size_t classes = 8;
  std::size_t per_class = 40;
  std::size_t views = 5;  // K image embeddings per object
  std::size_t dim = 64;   // teacher embedding dimension
  double noise = 0.1;     // sigma
  std::uint64_t seed = 1;
  std::size_t holdout_per_class = 0;  // trailing objects of each class held out
  std::size_t min_points = 1200;
  std::size_t max_points = 2000;
  std::size_t latent_dim = 4;

  void validate() const;
};

// Desk-scale stand-in for rendered/captioned 3DGS triplets.
//
// Each class owns a unit prototype, a mixture of anisotropic gaussian blobs
// and per-blob colors. Each object draws a small latent vector that shifts
// its blob positions and colors through shared linear maps and, through a
// third shared map, perturbs its teacher embeddings:
//   text   = normalize(prototype + sigma * M z)
//   view_k = normalize(prototype + sigma * M z + sigma * eps_k)
// so both class identity and object identity are recoverable from geometry.
struct SyntheticData {
  TripletManifest manifest;  // every object, class-major order
  std::vector<GaussianCloud> clouds;
  EmbeddingTable text;
  EmbeddingTable images;
  EmbeddingTable class_prototypes;  // keyed by label
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> heldout_indices;
};

SyntheticData gen_synthetic_triplets(const FixtureConfig& config);

struct FixturePaths {
  std::filesystem::path manifest;          // all objects
  std::filesystem::path train_manifest;    // == manifest when nothing is held out
  std::filesystem::path heldout_manifest;  // empty when nothing is held out
  std::filesystem::path text;
  std::filesystem::path images;
  std::filesystem::path classes;
};

// Writes assets/*.ply, text.gseb, image.gseb, classes.gseb and manifests.
FixturePaths write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

TripletManifest subset_manifest(const TripletManifest& manifest,
                                const std::vector<std::size_t>& indices);

}  // namespace splatalign
