#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace splatalign {

inline constexpr std::size_t kGaussianAttributes = 14;

// One degree-0 3DGS primitive as stored in standard assets: opacity is a
// logit, scale is a log-scale and the quaternion is (w, x, y, z), not
// necessarily unit length.
struct GaussianPoint {
  std::array<float, 3> position{};
  std::array<float, 3> color{};  // f_dc_0..2
  float opacity = 0.0f;
  std::array<float, 3> scale{};
  std::array<float, 4> rotation{1.0f, 0.0f, 0.0f, 0.0f};

  // Layout: position(3) color(3) opacity(1) scale(3) rotation(4).
  std::array<float, kGaussianAttributes> vectorize() const;
  static GaussianPoint from_vector(std::span<const float, kGaussianAttributes> v);

  bool is_finite() const;
  bool operator==(const GaussianPoint&) const = default;
};

struct GaussianCloud {
  std::vector<GaussianPoint> points;
  std::string source_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  // Throws EmptyCloudError / NumericError when the invariants do not hold.
  void validate() const;
};

// Draws exactly `target` points. Clouds at least as large as the target are
// sampled uniformly without replacement; smaller clouds keep every original
// point once and are topped up by uniform draws with replacement.
GaussianCloud subsample_points(const GaussianCloud& cloud, std::size_t target,
                               std::uint64_t seed);

}  // namespace splatalign
