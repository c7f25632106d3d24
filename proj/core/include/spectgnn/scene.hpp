#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spectgnn/ops.hpp"

namespace spectgnn {

/// Grayscale raster, row-major, intensities nominally in [0, 1].
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
};

/// Scene-to-pixel affine map: px = m0*x + m1*y + m2, py = m3*x + m4*y + m5.
struct AffineTransform {
  std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  Point2 apply(const Point2& p) const {
    return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
  }

  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

/// One observation/prediction episode. Positions are stored time-major:
/// history[t * N + n] is agent n at observed step t.
struct SceneWindow {
  std::string scene_id;
  std::vector<std::int64_t> agent_ids;
  std::size_t t_hist = 0;
  std::size_t t_fut = 0;
  double frame_period = 1.0;
  std::vector<Point2> history;
  /// Empty at inference time.
  std::vector<Point2> future;
  std::optional<Raster> image;
  AffineTransform image_transform;
  /// Image file referenced by the scene file, relative to it; may be empty.
  std::string image_path;

  std::size_t num_agents() const noexcept { return agent_ids.size(); }
  bool has_future() const noexcept { return !future.empty(); }

  const Point2& hist(std::size_t t, std::size_t n) const { return history[t * num_agents() + n]; }
  Point2& hist(std::size_t t, std::size_t n) { return history[t * num_agents() + n]; }
  const Point2& fut(std::size_t t, std::size_t n) const { return future[t * num_agents() + n]; }
  Point2& fut(std::size_t t, std::size_t n) { return future[t * num_agents() + n]; }

  /// Throws DataError unless N >= 1, T_h >= 1, T_f >= 1, the position
  /// arrays have the declared sizes and every coordinate is finite.
  void validate() const;
};

}  // namespace spectgnn
