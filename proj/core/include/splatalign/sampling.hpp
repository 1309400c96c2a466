#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "splatalign/tensor.hpp"

namespace splatalign {

// Farthest point sampling over an m x 3 position matrix. The first pick is
// the point with the largest L2 norm; every later pick maximizes the
// minimum distance to the picks so far. Ties go to the lowest index. The
// seed is accepted for interface stability and currently unused.
std::vector<std::size_t> farthest_point_sampling(const Matrix& positions,
                                                 std::size_t count,
                                                 std::uint64_t seed = 0);

// For every center, the `neighbors` nearest points by L2 distance in
// ascending order (ties by index). Returned row-major as centers x neighbors.
std::vector<std::size_t> knn_group(const Matrix& positions,
                                   std::span<const std::size_t> centers,
                                   std::size_t neighbors);

}  // namespace splatalign
