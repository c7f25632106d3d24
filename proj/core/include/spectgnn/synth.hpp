#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spectgnn/scene.hpp"

namespace spectgnn {

enum class ScenarioKind { linear, turning, stopping, crossing, roundabout };

ScenarioKind parse_scenario_kind(const std::string& name);
std::string to_string(ScenarioKind kind);

struct AgentInit {
  Point2 position;
  Point2 velocity;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::linear;
  std::size_t num_agents = 3;
  /// Standard deviation of additive position noise.
  double noise = 0.0;
  std::uint64_t seed = 0;
  /// Side length of the square scene [-extent/2, extent/2]^2.
  double extent = 40.0;
  std::size_t t_hist = 8;
  std::size_t t_fut = 12;
  double frame_period = 1.0;
  double speed_min = 0.6;
  double speed_max = 1.2;
  /// Largest |angular rate| for turning agents, rad per time unit.
  double turn_rate_max = 0.15;
  /// Crossing agents are pushed apart below this distance and never get
  /// closer than 1.05 times it.
  double repulsion_radius = 1.0;
  bool with_image = true;
  std::size_t image_size = 24;
  /// Half-width of the rasterized corridor around each path.
  double corridor = 2.0;
  std::string scene_id = "scene";
  /// Explicit start states; when non-empty they replace the random draw for
  /// linear, turning and stopping and disable recentring.
  std::vector<AgentInit> initial;

  /// ConfigError unless N >= 1, noise >= 0 and sizes/speeds are sensible.
  void validate() const;
};

/// Deterministic given the spec. Frame t is at time t * frame_period.
SceneWindow synth_generate(const ScenarioSpec& spec);

struct DatasetSpec {
  std::size_t num_scenes = 200;
  std::uint64_t seed = 0;
  std::vector<ScenarioKind> kinds{ScenarioKind::linear, ScenarioKind::turning, ScenarioKind::stopping,
                                  ScenarioKind::crossing, ScenarioKind::roundabout};
  std::size_t agents_min = 2;
  std::size_t agents_max = 6;
  double noise = 0.05;
  double extent = 40.0;
  std::size_t image_size = 24;
  std::size_t t_hist = 8;
  std::size_t t_fut = 12;
  bool with_image = true;
};

/// Scenes named scene_0000, scene_0001, ... with kinds and sizes drawn from
/// the dataset seed.
std::vector<SceneWindow> generate_dataset(const DatasetSpec& spec);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..n-1 then partition; train and val sizes are
/// floor(n * ratio), test takes the rest. ConfigError unless the ratios are
/// non-negative and sum to 1.
Split split_dataset(std::size_t n, const std::array<double, 3>& ratios = {0.6, 0.2, 0.2},
                    std::uint64_t seed = 0);

}  // namespace spectgnn
