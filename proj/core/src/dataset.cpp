#include "splatalign/dataset.hpp"

#include "splatalign/parallel.hpp"
#include "splatalign/ply.hpp"

namespace splatalign {

TripletDataset load_dataset(const std::filesystem::path& manifest_path,
                            const std::filesystem::path& text_path,
                            const std::filesystem::path& images_path) {
  TripletDataset d;
  d.manifest = load_manifest(manifest_path);
  d.text = load_embeddings(text_path);
  d.images = load_embeddings(images_path);
  resolve_manifest(d.manifest, d.text, d.images);
  d.clouds.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) d.clouds.push_back(read_ply_file(d.manifest.asset_path(i)));
  return d;
}

TripletDataset dataset_from_synthetic(const SyntheticData& data,
                                      const std::vector<std::size_t>& indices) {
  TripletDataset d;
  d.manifest = subset_manifest(data.manifest, indices);
  d.text = data.text;
  d.images = data.images;
  for (std::size_t i : indices) d.clouds.push_back(data.clouds.at(i));
  resolve_manifest(d.manifest, d.text, d.images);
  return d;
}

std::vector<Vector> embed_dataset(const Model& model, const TripletDataset& data,
                                  std::uint64_t seed, std::size_t threads) {
  std::vector<Vector> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    out[i] = model.embed_cloud(data.clouds[i], object_point_seed(seed, data.object_key(i)));
  });
  return out;
}

}  // namespace splatalign
