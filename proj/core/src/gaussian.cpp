#include "splatalign/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatalign/errors.hpp"
#include "splatalign/rng.hpp"

namespace splatalign {

std::array<float, kGaussianAttributes> GaussianPoint::vectorize() const {
  std::array<float, kGaussianAttributes> v{};
  auto it = std::copy(position.begin(), position.end(), v.begin());
  it = std::copy(color.begin(), color.end(), it);
  *it++ = opacity;
  it = std::copy(scale.begin(), scale.end(), it);
  std::copy(rotation.begin(), rotation.end(), it);
  return v;
}

GaussianPoint GaussianPoint::from_vector(
    std::span<const float, kGaussianAttributes> v) {
  GaussianPoint p;
  std::copy_n(v.begin(), 3, p.position.begin());
  std::copy_n(v.begin() + 3, 3, p.color.begin());
  p.opacity = v[6];
  std::copy_n(v.begin() + 7, 3, p.scale.begin());
  std::copy_n(v.begin() + 10, 4, p.rotation.begin());
  return p;
}

bool GaussianPoint::is_finite() const {
  const auto v = vectorize();
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

void GaussianCloud::validate() const {
  if (points.empty()) {
    throw EmptyCloudError("gaussian cloud '" + source_id + "' has no points");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].is_finite()) {
      throw NumericError("gaussian cloud '" + source_id + "': point " +
                         std::to_string(i) + " has a non-finite attribute");
    }
  }
}

GaussianCloud subsample_points(const GaussianCloud& cloud, std::size_t target,
                               std::uint64_t seed) {
  if (target == 0) throw ArgumentError("subsample_points: target must be >= 1");
  if (cloud.empty()) throw EmptyCloudError("subsample_points: empty cloud");

  Rng rng(seed, "subsample");
  const std::size_t m = cloud.size();
  std::vector<std::size_t> picks;
  picks.reserve(target);

  if (m >= target) {
    // Partial Fisher-Yates: the first `target` slots become the sample.
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < target; ++i) {
      const std::size_t j = i + rng.below(m - i);
      std::swap(idx[i], idx[j]);
    }
    picks.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target));
  } else {
    picks.resize(m);
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    while (picks.size() < target) picks.push_back(rng.below(m));
    for (std::size_t i = picks.size() - 1; i > 0; --i) {
      std::swap(picks[i], picks[rng.below(i + 1)]);
    }
  }

  GaussianCloud out;
  out.source_id = cloud.source_id;
  out.points.reserve(target);
  for (std::size_t i : picks) out.points.push_back(cloud.points[i]);
  return out;
}

}  // namespace splatalign
