#include "splatalign/sampling.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "splatalign/errors.hpp"

namespace splatalign {
namespace {

double squared_distance(const Matrix& p, std::size_t a, std::size_t b) {
  return (p.row(static_cast<Eigen::Index>(a)) - p.row(static_cast<Eigen::Index>(b)))
      .squaredNorm();
}

void check_positions(const Matrix& positions) {
  if (positions.cols() != 3) {
    throw ArgumentError("positions must have 3 columns");
  }
}

}  // namespace

std::vector<std::size_t> farthest_point_sampling(const Matrix& positions,
                                                 std::size_t count,
                                                 std::uint64_t /*seed*/) {
  check_positions(positions);
  const auto m = static_cast<std::size_t>(positions.rows());
  if (count == 0) throw ArgumentError("farthest_point_sampling: count must be >= 1");
  if (count > m) {
    throw ArgumentError("farthest_point_sampling: requested " + std::to_string(count) +
                        " samples from " + std::to_string(m) + " points");
  }

  std::size_t first = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double n = positions.row(static_cast<Eigen::Index>(i)).squaredNorm();
    if (n > best) {
      best = n;
      first = i;
    }
  }

  std::vector<std::size_t> picks{first};
  picks.reserve(count);
  std::vector<double> min_dist(m, std::numeric_limits<double>::infinity());
  std::vector<char> taken(m, 0);
  taken[first] = 1;
  std::size_t last = first;
  while (picks.size() < count) {
    std::size_t next = m;
    double far = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (taken[i]) continue;
      min_dist[i] = std::min(min_dist[i], squared_distance(positions, i, last));
      if (min_dist[i] > far) {
        far = min_dist[i];
        next = i;
      }
    }
    taken[next] = 1;
    picks.push_back(next);
    last = next;
  }
  return picks;
}

std::vector<std::size_t> knn_group(const Matrix& positions,
                                   std::span<const std::size_t> centers,
                                   std::size_t neighbors) {
  check_positions(positions);
  const auto m = static_cast<std::size_t>(positions.rows());
  if (neighbors == 0) throw ArgumentError("knn_group: neighbors must be >= 1");
  if (neighbors > m) {
    throw ArgumentError("knn_group: " + std::to_string(neighbors) +
                        " neighbors requested from " + std::to_string(m) + " points");
  }

  std::vector<std::size_t> out;
  out.reserve(centers.size() * neighbors);
  std::vector<std::size_t> order(m);
  std::vector<double> dist(m);
  for (std::size_t c : centers) {
    if (c >= m) throw ArgumentError("knn_group: center index out of range");
    for (std::size_t i = 0; i < m; ++i) dist[i] = squared_distance(positions, i, c);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto less = [&](std::size_t a, std::size_t b) {
      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(neighbors),
                      order.end(), less);
    out.insert(out.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(neighbors));
  }
  return out;
}

}  // namespace splatalign
