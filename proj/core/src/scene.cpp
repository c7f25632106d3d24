#include "spectgnn/scene.hpp"

#include <cmath>

#include "spectgnn/errors.hpp"

namespace spectgnn {

void SceneWindow::validate() const {
  const std::string tag = "scene '" + scene_id + "': ";
  const std::size_t n = num_agents();
  if (n == 0) throw DataError(tag + "no agents");
  if (t_hist == 0) throw DataError(tag + "t_hist must be at least 1");
  if (t_fut == 0) throw DataError(tag + "t_fut must be at least 1");
  if (history.size() != t_hist * n) {
    throw DataError(tag + "history holds " + std::to_string(history.size()) + " points, expected " +
                    std::to_string(t_hist * n));
  }
  if (!future.empty() && future.size() != t_fut * n) {
    throw DataError(tag + "future holds " + std::to_string(future.size()) + " points, expected " +
                    std::to_string(t_fut * n));
  }
  auto check = [&](const std::vector<Point2>& pts, const char* part) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!std::isfinite(pts[i].x) || !std::isfinite(pts[i].y)) {
        throw DataError(tag + "non-finite " + part + " position for agent " +
                        std::to_string(agent_ids[i % n]) + " at step " + std::to_string(i / n));
      }
    }
  };
  check(history, "history");
  check(future, "future");
  if (image && image->pixels.size() != image->width * image->height) {
    throw DataError(tag + "image pixel count does not match its size");
  }
}

}  // namespace spectgnn
