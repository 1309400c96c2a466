#include "splatalign/curves.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatalign/errors.hpp"

namespace splatalign {
namespace {

void check_cell(const GridCell& cell, unsigned bits, const char* who) {
  if (bits < 1 || bits > kMaxCurveBits) {
    throw ArgumentError(std::string(who) + ": bits must be in [1, 21]");
  }
  const std::uint64_t limit = std::uint64_t{1} << bits;
  for (std::uint32_t c : cell) {
    if (c >= limit) {
      throw ArgumentError(std::string(who) + ": coordinate " + std::to_string(c) +
                          " outside [0, 2^" + std::to_string(bits) + ")");
    }
  }
}

void check_index(std::uint64_t index, unsigned bits, const char* who) {
  if (bits < 1 || bits > kMaxCurveBits) {
    throw ArgumentError(std::string(who) + ": bits must be in [1, 21]");
  }
  if (index >= (std::uint64_t{1} << (3 * bits))) {
    throw ArgumentError(std::string(who) + ": index outside the grid");
  }
}

// Skilling, "Programming the Hilbert curve" (2004): in-place conversion
// between axis coordinates and the transposed Hilbert representation.
void axes_to_transpose(std::array<std::uint32_t, 3>& x, unsigned bits) {
  const std::uint32_t top = std::uint32_t{1} << (bits - 1);
  for (std::uint32_t q = top; q > 1; q >>= 1) {
    const std::uint32_t p = q - 1;
    for (int i = 0; i < 3; ++i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        const std::uint32_t t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
  for (int i = 1; i < 3; ++i) x[i] ^= x[i - 1];
  std::uint32_t t = 0;
  for (std::uint32_t q = top; q > 1; q >>= 1) {
    if (x[2] & q) t ^= q - 1;
  }
  for (auto& v : x) v ^= t;
}

void transpose_to_axes(std::array<std::uint32_t, 3>& x, unsigned bits) {
  const std::uint32_t n = std::uint32_t{2} << (bits - 1);
  std::uint32_t t = x[2] >> 1;
  for (int i = 2; i > 0; --i) x[i] ^= x[i - 1];
  x[0] ^= t;
  for (std::uint32_t q = 2; q != n; q <<= 1) {
    const std::uint32_t p = q - 1;
    for (int i = 2; i >= 0; --i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
}

}  // namespace

std::uint64_t morton_encode(const GridCell& cell, unsigned bits) {
  check_cell(cell, bits, "morton_encode");
  std::uint64_t index = 0;
  for (unsigned j = 0; j < bits; ++j) {
    for (unsigned axis = 0; axis < 3; ++axis) {
      index |= static_cast<std::uint64_t>((cell[axis] >> j) & 1u) << (3 * j + axis);
    }
  }
  return index;
}

GridCell morton_decode(std::uint64_t index, unsigned bits) {
  check_index(index, bits, "morton_decode");
  GridCell cell{};
  for (unsigned j = 0; j < bits; ++j) {
    for (unsigned axis = 0; axis < 3; ++axis) {
      cell[axis] |= static_cast<std::uint32_t>((index >> (3 * j + axis)) & 1u) << j;
    }
  }
  return cell;
}

std::uint64_t hilbert_encode(const GridCell& cell, unsigned bits) {
  check_cell(cell, bits, "hilbert_encode");
  std::array<std::uint32_t, 3> x = cell;
  axes_to_transpose(x, bits);
  // Interleave the transposed form, most significant bit first, x[0] leading.
  std::uint64_t index = 0;
  for (int j = static_cast<int>(bits) - 1; j >= 0; --j) {
    for (unsigned axis = 0; axis < 3; ++axis) {
      index = (index << 1) | ((x[axis] >> j) & 1u);
    }
  }
  return index;
}

GridCell hilbert_decode(std::uint64_t index, unsigned bits) {
  check_index(index, bits, "hilbert_decode");
  std::array<std::uint32_t, 3> x{};
  unsigned shift = 3 * bits;
  for (int j = static_cast<int>(bits) - 1; j >= 0; --j) {
    for (unsigned axis = 0; axis < 3; ++axis) {
      --shift;
      x[axis] |= static_cast<std::uint32_t>((index >> shift) & 1u) << j;
    }
  }
  transpose_to_axes(x, bits);
  return x;
}

std::string_view ordering_name(Ordering o) {
  switch (o) {
    case Ordering::xyz:
      return "xyz";
    case Ordering::hilbert:
      return "hilbert";
    case Ordering::z_order:
      return "z_order";
  }
  return "unknown";
}

Ordering parse_ordering(std::string_view name) {
  if (name == "xyz") return Ordering::xyz;
  if (name == "hilbert") return Ordering::hilbert;
  if (name == "z_order" || name == "z" || name == "zorder") return Ordering::z_order;
  throw ArgumentError("unknown ordering '" + std::string(name) +
                      "' (expected xyz, hilbert or z_order)");
}

std::vector<Ordering> parse_orderings(std::string_view comma_list) {
  std::vector<Ordering> out;
  std::size_t start = 0;
  while (start <= comma_list.size()) {
    const std::size_t comma = comma_list.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? comma_list.size() : comma;
    const Ordering o = parse_ordering(comma_list.substr(start, end - start));
    if (std::find(out.begin(), out.end(), o) != out.end()) {
      throw ArgumentError("ordering '" + std::string(ordering_name(o)) + "' listed twice");
    }
    out.push_back(o);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ArgumentError("at least one ordering is required");
  return out;
}

std::string join_orderings(std::span<const Ordering> orderings) {
  std::string s;
  for (std::size_t i = 0; i < orderings.size(); ++i) {
    if (i) s += ',';
    s += ordering_name(orderings[i]);
  }
  return s;
}

std::vector<GridCell> quantize_centers(const Matrix& centers, unsigned bits) {
  if (bits < 1 || bits > kMaxCurveBits) {
    throw ArgumentError("quantize_centers: bits must be in [1, 21]");
  }
  const auto g = static_cast<std::size_t>(centers.rows());
  const double top = static_cast<double>((std::uint64_t{1} << bits) - 1);
  std::vector<GridCell> cells(g);
  for (Eigen::Index axis = 0; axis < 3; ++axis) {
    const double lo = centers.col(axis).minCoeff();
    const double span = centers.col(axis).maxCoeff() - lo;
    for (std::size_t i = 0; i < g; ++i) {
      std::uint32_t c = 0;
      if (span >= 1e-12) {
        const double t = (centers(static_cast<Eigen::Index>(i), axis) - lo) / span;
        c = static_cast<std::uint32_t>(std::clamp(std::floor(t * top + 0.5), 0.0, top));
      }
      cells[i][static_cast<std::size_t>(axis)] = c;
    }
  }
  return cells;
}

std::vector<std::size_t> order_patches(const Matrix& centers, Ordering strategy,
                                       unsigned bits) {
  if (centers.cols() != 3) throw ArgumentError("order_patches: centers must be g x 3");
  if (!centers.allFinite()) throw NumericError("order_patches: non-finite center");
  const auto g = static_cast<std::size_t>(centers.rows());
  std::vector<std::size_t> perm(g);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (g == 0) return perm;

  if (strategy == Ordering::xyz) {
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
      const auto ra = centers.row(static_cast<Eigen::Index>(a));
      const auto rb = centers.row(static_cast<Eigen::Index>(b));
      for (Eigen::Index k = 0; k < 3; ++k) {
        if (ra(k) != rb(k)) return ra(k) < rb(k);
      }
      return false;
    });
    return perm;
  }

  const auto cells = quantize_centers(centers, bits);
  std::vector<std::uint64_t> keys(g);
  for (std::size_t i = 0; i < g; ++i) {
    keys[i] = strategy == Ordering::hilbert ? hilbert_encode(cells[i], bits)
                                            : morton_encode(cells[i], bits);
  }
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return perm;
}

}  // namespace splatalign
