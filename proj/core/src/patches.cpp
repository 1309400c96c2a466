#include "splatalign/patches.hpp"

#include <cmath>

#include "splatalign/errors.hpp"
#include "splatalign/sampling.hpp"

namespace splatalign {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::array<double, 9> quaternion_to_matrix(double w, double x, double y, double z) {
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

Matrix normalize_attributes(const Matrix& raw, const Eigen::Vector3d& center,
                            NormalizationStats* stats) {
  if (raw.cols() != static_cast<Eigen::Index>(kGaussianAttributes)) {
    throw ArgumentError("normalize_attributes: expected rows of 14 attributes");
  }
  if (!raw.allFinite() || !center.allFinite()) {
    throw NumericError("normalize_attributes: non-finite input");
  }
  Matrix out(raw.rows(), static_cast<Eigen::Index>(kPatchFeatures));
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    const auto in = raw.row(r);
    auto o = out.row(r);
    for (int k = 0; k < 3; ++k) o(k) = in(k) - center(k);
    for (int k = 3; k < 6; ++k) o(k) = in(k);
    o(6) = sigmoid(in(6));
    for (int k = 7; k < 10; ++k) o(k) = sigmoid(in(k));

    double w = in(10), x = in(11), y = in(12), z = in(13);
    const double norm = std::sqrt(w * w + x * x + y * y + z * z);
    if (norm == 0.0) {
      w = 1.0;
      x = y = z = 0.0;
      if (stats) ++stats->degenerate_quaternions;
    } else {
      w /= norm;
      x /= norm;
      y /= norm;
      z /= norm;
    }
    const auto rot = quaternion_to_matrix(w, x, y, z);
    for (int k = 0; k < 9; ++k) o(10 + k) = rot[static_cast<std::size_t>(k)];
  }
  return out;
}

Matrix cloud_positions(const GaussianCloud& cloud) {
  Matrix p(static_cast<Eigen::Index>(cloud.size()), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      p(static_cast<Eigen::Index>(i), k) = cloud.points[i].position[static_cast<std::size_t>(k)];
    }
  }
  return p;
}

PatchSet build_patches(const GaussianCloud& cloud, std::size_t num_patches,
                       std::size_t neighbors, std::uint64_t seed,
                       NormalizationStats* stats) {
  cloud.validate();
  const Matrix positions = cloud_positions(cloud);
  PatchSet ps;
  ps.num_patches = num_patches;
  ps.neighbors = neighbors;
  const auto centers = farthest_point_sampling(positions, num_patches, seed);
  ps.groups = knn_group(positions, centers, neighbors);

  ps.centers.resize(static_cast<Eigen::Index>(num_patches), 3);
  ps.features.resize(static_cast<Eigen::Index>(num_patches * neighbors),
                     static_cast<Eigen::Index>(kPatchFeatures));
  Matrix raw(static_cast<Eigen::Index>(neighbors), static_cast<Eigen::Index>(kGaussianAttributes));
  for (std::size_t p = 0; p < num_patches; ++p) {
    const Eigen::Vector3d center = positions.row(static_cast<Eigen::Index>(centers[p])).transpose();
    ps.centers.row(static_cast<Eigen::Index>(p)) = center.transpose();
    for (std::size_t j = 0; j < neighbors; ++j) {
      const auto attrs = cloud.points[ps.groups[p * neighbors + j]].vectorize();
      for (std::size_t k = 0; k < kGaussianAttributes; ++k) {
        raw(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = attrs[k];
      }
    }
    ps.features.middleRows(static_cast<Eigen::Index>(p * neighbors),
                           static_cast<Eigen::Index>(neighbors)) =
        normalize_attributes(raw, center, stats);
  }
  return ps;
}

}  // namespace splatalign
