#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splatalign/tensor.hpp"

namespace splatalign {

using GridCell = std::array<std::uint32_t, 3>;

inline constexpr unsigned kMaxCurveBits = 21;

// Z-order: bit j of x/y/z lands at output bit 3j / 3j+1 / 3j+2.
std::uint64_t morton_encode(const GridCell& cell, unsigned bits);
GridCell morton_decode(std::uint64_t index, unsigned bits);

// 3D Hilbert index via Skilling's transpose construction. Consecutive
// indices are face-adjacent cells; (0,0,0) maps to 0.
std::uint64_t hilbert_encode(const GridCell& cell, unsigned bits);
GridCell hilbert_decode(std::uint64_t index, unsigned bits);

enum class Ordering { xyz, hilbert, z_order };

std::string_view ordering_name(Ordering o);
// Accepts "xyz", "hilbert", "z_order" and the short form "z".
Ordering parse_ordering(std::string_view name);
std::vector<Ordering> parse_orderings(std::string_view comma_list);
std::string join_orderings(std::span<const Ordering> orderings);

// Sort permutation of patch centers (g x 3) under a serialization strategy.
// Centers are min-max quantized per axis onto 0..2^bits-1 for the curve
// strategies; xyz sorts raw coordinates lexicographically. Ties keep the
// lower original index first.
std::vector<std::size_t> order_patches(const Matrix& centers, Ordering strategy,
                                       unsigned bits);

// Per-axis min-max quantization used by order_patches. Axes whose span is
// below 1e-12 map every center to cell 0.
std::vector<GridCell> quantize_centers(const Matrix& centers, unsigned bits);

}  // namespace splatalign
