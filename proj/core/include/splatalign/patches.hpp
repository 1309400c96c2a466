#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "splatalign/gaussian.hpp"
#include "splatalign/tensor.hpp"

namespace splatalign {

// Per-point feature layout after normalization:
//   [0,3)  position relative to the patch center
//   [3,6)  SH-0 color
//   6      sigmoid(opacity)
//   [7,10) sigmoid(scale)
//   [10,19) rotation matrix, row-major
inline constexpr std::size_t kPatchFeatures = 19;
inline constexpr std::size_t kPositionColorFeatures = 6;

struct NormalizationStats {
  std::size_t degenerate_quaternions = 0;
};

// Maps raw 14-attribute rows (n x 14) to normalized 19-feature rows. A
// zero-norm quaternion is replaced by identity and counted in `stats`.
Matrix normalize_attributes(const Matrix& raw, const Eigen::Vector3d& center,
                            NormalizationStats* stats = nullptr);

// Unit quaternion (w, x, y, z) to a row-major rotation matrix.
std::array<double, 9> quaternion_to_matrix(double w, double x, double y, double z);

struct PatchSet {
  std::size_t num_patches = 0;
  std::size_t neighbors = 0;
  Matrix centers;                    // g x 3
  std::vector<std::size_t> groups;   // g * n point indices, row-major
  Matrix features;                   // (g * n) x 19, patch-major
};

// FPS centers, kNN groups and attribute normalization for one cloud.
PatchSet build_patches(const GaussianCloud& cloud, std::size_t num_patches,
                       std::size_t neighbors, std::uint64_t seed = 0,
                       NormalizationStats* stats = nullptr);

Matrix cloud_positions(const GaussianCloud& cloud);

}  // namespace splatalign
