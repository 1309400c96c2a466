#include "splatalign/fixtures.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include <Eigen/Geometry>

#include "splatalign/errors.hpp"
#include "splatalign/ply.hpp"
#include "splatalign/rng.hpp"
#include "splatalign/tensor.hpp"

namespace splatalign {
namespace {

constexpr std::size_t kBlobsPerClass = 4;
constexpr double kColorLatentScale = 0.6;
constexpr double kPositionLatentScale = 0.2;
// Per-patch centering hides absolute blob offsets, so opacity and scale carry
// the latent too; together with color that is 7 observable channels.
constexpr double kOpacityLatentScale = 1.0;
constexpr double kScaleLatentScale = 0.4;

struct Blob {
  Eigen::Vector3d center;
  Eigen::Vector3d axis_scale;
  Eigen::Matrix3d rotation;
  Eigen::Vector4d quaternion;  // w, x, y, z
  Eigen::Vector3d color;
  double weight = 1.0;
};

struct ClassModel {
  Vector prototype;
  std::array<Blob, kBlobsPerClass> blobs;
  double total_weight = 0.0;
};

Vector gaussian_vector(Rng& rng, std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return v;
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double std) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std * rng.normal();
  }
  return m;
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

ClassModel make_class(Rng& rng, std::size_t dim) {
  ClassModel cm;
  cm.prototype = gaussian_vector(rng, dim).normalized();
  for (Blob& b : cm.blobs) {
    for (int k = 0; k < 3; ++k) b.center(k) = uniform(rng, -1.0, 1.0);
    for (int k = 0; k < 3; ++k) b.axis_scale(k) = uniform(rng, 0.05, 0.35);
    Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    b.quaternion = q;
    b.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
    for (int k = 0; k < 3; ++k) b.color(k) = uniform(rng, -1.5, 1.5);
    b.weight = uniform(rng, 0.5, 1.5);
    cm.total_weight += b.weight;
  }
  return cm;
}

std::vector<float> to_unit_floats(const Vector& v) {
  const Vector u = v.normalized();
  std::vector<float> out(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(u(i));
  return out;
}

std::string object_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "obj_%05zu", i);
  return buf;
}

std::string class_label(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "class_%02zu", c);
  return buf;
}

}  // namespace

void FixtureConfig::validate() const {
  if (classes < 2) throw ArgumentError("fixtures: classes must be >= 2");
  if (per_class < 2) throw ArgumentError("fixtures: per_class must be >= 2");
  if (views < 1) throw ArgumentError("fixtures: views must be >= 1");
  if (dim < 1) throw ArgumentError("fixtures: dim must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ArgumentError("fixtures: noise must be >= 0");
  if (holdout_per_class >= per_class) {
    throw ArgumentError("fixtures: holdout_per_class must leave at least one training object");
  }
  if (min_points < 1 || max_points < min_points) {
    throw ArgumentError("fixtures: need 1 <= min_points <= max_points");
  }
  if (latent_dim < 1) throw ArgumentError("fixtures: latent_dim must be >= 1");
}

SyntheticData gen_synthetic_triplets(const FixtureConfig& config) {
  config.validate();
  const std::size_t q = config.latent_dim;
  const double latent_norm = 1.0 / std::sqrt(static_cast<double>(q));

  Rng shared(config.seed, "fixture-shared");
  const Matrix embed_map = gaussian_matrix(shared, config.dim, q, latent_norm);
  const Matrix color_map = gaussian_matrix(shared, 3, q, kColorLatentScale * latent_norm);
  std::array<Matrix, kBlobsPerClass> position_maps;
  for (auto& m : position_maps) m = gaussian_matrix(shared, 3, q, kPositionLatentScale * latent_norm);
  const Matrix opacity_map = gaussian_matrix(shared, 1, q, kOpacityLatentScale * latent_norm);
  const Matrix scale_map = gaussian_matrix(shared, 3, q, kScaleLatentScale * latent_norm);

  std::vector<ClassModel> classes;
  for (std::size_t c = 0; c < config.classes; ++c) {
    Rng rng(config.seed, "fixture-class", c);
    classes.push_back(make_class(rng, config.dim));
  }

  SyntheticData data;
  data.manifest.dim = config.dim;
  data.text = EmbeddingTable(config.dim);
  data.images = EmbeddingTable(config.dim);
  data.class_prototypes = EmbeddingTable(config.dim);
  for (std::size_t c = 0; c < config.classes; ++c) {
    data.class_prototypes.add(class_label(c), to_unit_floats(classes[c].prototype));
  }

  for (std::size_t c = 0; c < config.classes; ++c) {
    const ClassModel& cm = classes[c];
    for (std::size_t i = 0; i < config.per_class; ++i) {
      const std::size_t obj = c * config.per_class + i;
      Rng rng(config.seed, "fixture-object", obj);
      const Vector z = gaussian_vector(rng, q);

      const Vector anchor = cm.prototype + config.noise * (embed_map * z);
      const std::string id = object_id(obj);
      ManifestEntry entry;
      entry.asset = "assets/" + id + ".ply";
      entry.text_key = id + "/text";
      entry.label = class_label(c);
      data.text.add(entry.text_key, to_unit_floats(anchor));
      for (std::size_t k = 0; k < config.views; ++k) {
        const Vector view = anchor + config.noise * gaussian_vector(rng, config.dim);
        entry.image_keys.push_back(id + "/view_" + std::to_string(k));
        data.images.add(entry.image_keys.back(), to_unit_floats(view));
      }
      data.manifest.entries.push_back(std::move(entry));

      GaussianCloud cloud;
      cloud.source_id = id;
      const std::size_t count =
          config.min_points + rng.below(config.max_points - config.min_points + 1);
      const Eigen::Vector3d color_shift = color_map * z;
      const Eigen::Vector3d scale_shift = scale_map * z;
      const double opacity_shift = (opacity_map * z)(0);
      cloud.points.reserve(count);
      for (std::size_t p = 0; p < count; ++p) {
        double pick = rng.uniform() * cm.total_weight;
        std::size_t b = 0;
        while (b + 1 < kBlobsPerClass && pick >= cm.blobs[b].weight) {
          pick -= cm.blobs[b].weight;
          ++b;
        }
        const Blob& blob = cm.blobs[b];
        const Eigen::Vector3d local(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d pos = blob.center + position_maps[b] * z +
                                    blob.rotation * blob.axis_scale.cwiseProduct(local);
        GaussianPoint gp;
        for (int k = 0; k < 3; ++k) {
          gp.position[static_cast<std::size_t>(k)] = static_cast<float>(pos(k));
          gp.color[static_cast<std::size_t>(k)] =
              static_cast<float>(blob.color(k) + color_shift(k) + 0.05 * rng.normal());
          gp.scale[static_cast<std::size_t>(k)] =
              static_cast<float>(std::log(0.3 * blob.axis_scale(k)) + scale_shift(k) + 0.2 * rng.normal());
        }
        gp.opacity = static_cast<float>(1.0 + opacity_shift + 0.5 * rng.normal());
        for (int k = 0; k < 4; ++k) {
          gp.rotation[static_cast<std::size_t>(k)] =
              static_cast<float>(blob.quaternion(k) + 0.05 * rng.normal());
        }
        cloud.points.push_back(gp);
      }
      data.clouds.push_back(std::move(cloud));

      if (i + config.holdout_per_class >= config.per_class) {
        data.heldout_indices.push_back(obj);
      } else {
        data.train_indices.push_back(obj);
      }
    }
  }
  return data;
}

TripletManifest subset_manifest(const TripletManifest& manifest,
                                const std::vector<std::size_t>& indices) {
  TripletManifest out;
  out.dim = manifest.dim;
  out.base_dir = manifest.base_dir;
  for (std::size_t i : indices) out.entries.push_back(manifest.entries.at(i));
  return out;
}

FixturePaths write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "assets", ec);
  if (ec) throw IoError("cannot create fixture directory '" + dir.string() + "': " + ec.message());

  for (std::size_t i = 0; i < data.clouds.size(); ++i) {
    write_ply_file(data.clouds[i], dir / data.manifest.entries[i].asset);
  }
  FixturePaths paths;
  paths.text = dir / "text.gseb";
  paths.images = dir / "image.gseb";
  paths.classes = dir / "classes.gseb";
  save_embeddings(data.text, paths.text);
  save_embeddings(data.images, paths.images);
  save_embeddings(data.class_prototypes, paths.classes);

  paths.manifest = dir / "manifest.json";
  save_manifest(data.manifest, paths.manifest);
  if (data.heldout_indices.empty()) {
    paths.train_manifest = paths.manifest;
  } else {
    paths.train_manifest = dir / "train.json";
    paths.heldout_manifest = dir / "heldout.json";
    save_manifest(subset_manifest(data.manifest, data.train_indices), paths.train_manifest);
    save_manifest(subset_manifest(data.manifest, data.heldout_indices), paths.heldout_manifest);
  }
  return paths;
}

}  // namespace splatalign
