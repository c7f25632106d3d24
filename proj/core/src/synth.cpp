#include "spectgnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "spectgnn/errors.hpp"
#include "spectgnn/rng.hpp"

namespace spectgnn {

namespace {

constexpr double kPi = std::numbers::pi;

using Path = std::vector<Point2>;  // one point per frame

struct Motion {
  Point2 p0;
  double heading;
  double speed;
};

Motion draw_motion(const ScenarioSpec& spec, Rng& rng, std::size_t a) {
  if (!spec.initial.empty()) {
    const AgentInit& s = spec.initial[a];
    return {s.position, std::atan2(s.velocity.y, s.velocity.x), std::hypot(s.velocity.x, s.velocity.y)};
  }
  return {{0.0, 0.0}, rng.uniform(-kPi, kPi), rng.uniform(spec.speed_min, spec.speed_max)};
}

Path linear_path(const ScenarioSpec& spec, const AgentInit* init, const Motion& m, std::size_t frames) {
  Path path(frames);
  const Point2 v = init ? init->velocity : Point2{m.speed * std::cos(m.heading), m.speed * std::sin(m.heading)};
  for (std::size_t t = 0; t < frames; ++t) {
    const double tau = static_cast<double>(t) * spec.frame_period;
    path[t] = {m.p0.x + v.x * tau, m.p0.y + v.y * tau};
  }
  return path;
}

Path turning_path(const ScenarioSpec& spec, const Motion& m, double omega, std::size_t frames) {
  Path path(frames);
  const double r = m.speed / omega;
  for (std::size_t t = 0; t < frames; ++t) {
    const double th = m.heading + omega * static_cast<double>(t) * spec.frame_period;
    path[t] = {m.p0.x + r * (std::sin(th) - std::sin(m.heading)),
               m.p0.y + r * (std::cos(m.heading) - std::cos(th))};
  }
  return path;
}

Path stopping_path(const ScenarioSpec& spec, const Motion& m, double stop_time, std::size_t frames) {
  Path path(frames);
  const Point2 dir{std::cos(m.heading), std::sin(m.heading)};
  for (std::size_t t = 0; t < frames; ++t) {
    const double tau = std::min(static_cast<double>(t) * spec.frame_period, stop_time);
    const double dist = m.speed * (tau - tau * tau / (2.0 * stop_time));
    path[t] = {m.p0.x + dir.x * dist, m.p0.y + dir.y * dist};
  }
  return path;
}

// Pushes pairs apart until every pair is at least `min_dist` apart.
void separate(std::vector<Point2>& p, double min_dist) {
  const double target = min_dist * (1.0 + 1e-6);
  for (int pass = 0; pass < 200; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = i + 1; j < p.size(); ++j) {
        double dx = p[j].x - p[i].x, dy = p[j].y - p[i].y;
        double d = std::hypot(dx, dy);
        if (d >= min_dist) continue;
        if (d == 0.0) {
          dx = 1.0;
          dy = 0.0;
          d = 1.0;
        } else {
          dx /= d;
          dy /= d;
        }
        const double push = 0.5 * (target - std::min(d, target));
        p[i].x -= dx * push;
        p[i].y -= dy * push;
        p[j].x += dx * push;
        p[j].y += dy * push;
        moved = true;
      }
    }
    if (!moved) return;
  }
}

std::vector<Path> crossing_paths(const ScenarioSpec& spec, Rng& rng, std::size_t frames) {
  const std::size_t n = spec.num_agents;
  const std::size_t group_a = (n + 1) / 2;
  const double phi = rng.uniform(-kPi, kPi);
  const double turn = rng.uniform() < 0.5 ? kPi / 2 : -kPi / 2;
  const double radius = spec.repulsion_radius;
  const double t_mid = 0.5 * static_cast<double>(frames - 1) * spec.frame_period;
  const double speeds[2] = {rng.uniform(spec.speed_min, spec.speed_max),
                            rng.uniform(spec.speed_min, spec.speed_max)};

  std::vector<Point2> pos(n), desired(n);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t g = a < group_a ? 0 : 1;
    const std::size_t k = g == 0 ? a : a - group_a;
    const std::size_t size = g == 0 ? group_a : n - group_a;
    const double ang = phi + (g == 0 ? 0.0 : turn);
    const Point2 dir{std::cos(ang), std::sin(ang)};
    const Point2 lat{-dir.y, dir.x};
    const double offset = (static_cast<double>(k) - 0.5 * static_cast<double>(size - 1)) * 2.5 * radius;
    const double along = -speeds[g] * t_mid + rng.uniform(-0.5, 0.5) * radius;
    pos[a] = {dir.x * along + lat.x * offset, dir.y * along + lat.y * offset};
    desired[a] = {dir.x * speeds[g], dir.y * speeds[g]};
  }
  separate(pos, 1.05 * radius);

  std::vector<Path> paths(n, Path(frames));
  constexpr int kSubsteps = 10;
  const double h = spec.frame_period / kSubsteps;
  const double reach = 3.0 * radius;
  std::vector<Point2> vel(n);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t a = 0; a < n; ++a) paths[a][t] = pos[a];
    if (t + 1 == frames) break;
    for (int s = 0; s < kSubsteps; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        Point2 v = desired[i];
        const double cap = 3.0 * std::hypot(v.x, v.y);
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const double dx = pos[i].x - pos[j].x, dy = pos[i].y - pos[j].y;
          const double d = std::hypot(dx, dy);
          if (d >= reach || d == 0.0) continue;
          const double f = speeds[0] * (1.0 / d - 1.0 / reach) * radius;
          v.x += f * dx / d;
          v.y += f * dy / d;
        }
        const double norm = std::hypot(v.x, v.y);
        if (norm > cap) {
          v.x *= cap / norm;
          v.y *= cap / norm;
        }
        vel[i] = v;
      }
      for (std::size_t i = 0; i < n; ++i) {
        pos[i].x += h * vel[i].x;
        pos[i].y += h * vel[i].y;
      }
      separate(pos, 1.05 * radius);
    }
  }
  return paths;
}

std::vector<Path> roundabout_paths(const ScenarioSpec& spec, Rng& rng, std::size_t frames) {
  const double base = rng.uniform(spec.extent / 8.0, spec.extent / 5.0);
  const Point2 centre{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  const double sense = rng.uniform() < 0.5 ? 1.0 : -1.0;
  std::vector<Path> paths;
  for (std::size_t a = 0; a < spec.num_agents; ++a) {
    const double r = base + 1.5 * static_cast<double>(rng.index(2));
    const double th0 = rng.uniform(-kPi, kPi);
    const double omega = sense * rng.uniform(spec.speed_min, spec.speed_max) / r;
    Path path(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      const double th = th0 + omega * static_cast<double>(t) * spec.frame_period;
      path[t] = {centre.x + r * std::cos(th), centre.y + r * std::sin(th)};
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double u = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return std::hypot(p.x - (a.x + u * vx), p.y - (a.y + u * vy));
}

Raster rasterize(const std::vector<Path>& paths, const ScenarioSpec& spec, const AffineTransform& tf) {
  const std::size_t size = spec.image_size;
  Raster r{size, size, std::vector<double>(size * size, 0.0)};
  const double scale = tf.m[0];
  const double pixel = 1.0 / scale;
  for (std::size_t py = 0; py < size; ++py) {
    for (std::size_t px = 0; px < size; ++px) {
      const Point2 p{(static_cast<double>(px) - tf.m[2]) / scale, (static_cast<double>(py) - tf.m[5]) / scale};
      double best = std::numeric_limits<double>::infinity();
      for (const Path& path : paths) {
        if (path.size() == 1) best = std::min(best, std::hypot(p.x - path[0].x, p.y - path[0].y));
        for (std::size_t t = 1; t < path.size(); ++t) {
          best = std::min(best, segment_distance(p, path[t - 1], path[t]));
        }
      }
      const double v = std::clamp((spec.corridor + pixel - best) / pixel, 0.0, 1.0);
      r.at(px, py) = std::round(v * 255.0) / 255.0;
    }
  }
  return r;
}

}  // namespace

ScenarioKind parse_scenario_kind(const std::string& name) {
  if (name == "linear") return ScenarioKind::linear;
  if (name == "turning") return ScenarioKind::turning;
  if (name == "stopping") return ScenarioKind::stopping;
  if (name == "crossing") return ScenarioKind::crossing;
  if (name == "roundabout") return ScenarioKind::roundabout;
  throw ConfigError("unknown scenario kind '" + name + "'");
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::linear: return "linear";
    case ScenarioKind::turning: return "turning";
    case ScenarioKind::stopping: return "stopping";
    case ScenarioKind::crossing: return "crossing";
    case ScenarioKind::roundabout: return "roundabout";
  }
  return "unknown";
}

void ScenarioSpec::validate() const {
  if (num_agents == 0) throw ConfigError("scenario needs at least one agent");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (!(extent > 0.0)) throw ConfigError("extent must be positive");
  if (t_hist == 0 || t_fut == 0) throw ConfigError("t_hist and t_fut must be positive");
  if (!(frame_period > 0.0)) throw ConfigError("frame_period must be positive");
  if (!(speed_min > 0.0) || speed_max < speed_min) throw ConfigError("need 0 < speed_min <= speed_max");
  if (!(repulsion_radius > 0.0)) throw ConfigError("repulsion_radius must be positive");
  if (with_image && image_size < 2) throw ConfigError("image_size must be at least 2");
  if (!initial.empty()) {
    if (initial.size() != num_agents) throw ConfigError("initial states must match num_agents");
    if (kind == ScenarioKind::crossing || kind == ScenarioKind::roundabout) {
      throw ConfigError("explicit initial states apply to linear, turning and stopping only");
    }
  }
}

SceneWindow synth_generate(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.num_agents;
  const std::size_t frames = spec.t_hist + spec.t_fut;
  const double total = static_cast<double>(frames - 1) * spec.frame_period;
  const bool explicit_init = !spec.initial.empty();

  std::vector<Path> paths;
  switch (spec.kind) {
    case ScenarioKind::linear:
    case ScenarioKind::turning:
    case ScenarioKind::stopping:
      for (std::size_t a = 0; a < n; ++a) {
        const Motion m = draw_motion(spec, rng, a);
        if (spec.kind == ScenarioKind::linear) {
          paths.push_back(linear_path(spec, explicit_init ? &spec.initial[a] : nullptr, m, frames));
        } else if (spec.kind == ScenarioKind::turning) {
          const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
          paths.push_back(turning_path(spec, m, sign * rng.uniform(0.3, 1.0) * spec.turn_rate_max, frames));
        } else {
          paths.push_back(stopping_path(spec, m, rng.uniform(0.3, 0.9) * std::max(total, spec.frame_period),
                                        frames));
        }
        if (!explicit_init) {
          // Place the last observed position inside the central half of the scene.
          const Point2 anchor{rng.uniform(-0.25, 0.25) * spec.extent, rng.uniform(-0.25, 0.25) * spec.extent};
          const Point2 last = paths.back()[spec.t_hist - 1];
          for (Point2& p : paths.back()) {
            p.x += anchor.x - last.x;
            p.y += anchor.y - last.y;
          }
        }
      }
      break;
    case ScenarioKind::crossing:
      paths = crossing_paths(spec, rng, frames);
      break;
    case ScenarioKind::roundabout:
      paths = roundabout_paths(spec, rng, frames);
      break;
  }

  SceneWindow scene;
  scene.scene_id = spec.scene_id;
  scene.t_hist = spec.t_hist;
  scene.t_fut = spec.t_fut;
  scene.frame_period = spec.frame_period;
  for (std::size_t a = 0; a < n; ++a) scene.agent_ids.push_back(static_cast<std::int64_t>(a));
  scene.history.resize(spec.t_hist * n);
  scene.future.resize(spec.t_fut * n);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t a = 0; a < n; ++a) {
      Point2 p = paths[a][t];
      if (spec.noise > 0.0) {
        p.x += spec.noise * rng.normal();
        p.y += spec.noise * rng.normal();
      }
      (t < spec.t_hist ? scene.hist(t, a) : scene.fut(t - spec.t_hist, a)) = p;
    }
  }
  if (spec.with_image) {
    const double scale = static_cast<double>(spec.image_size - 1) / spec.extent;
    const double shift = 0.5 * spec.extent * scale;
    scene.image_transform.m = {scale, 0.0, shift, 0.0, scale, shift};
    scene.image = rasterize(paths, spec, scene.image_transform);
  }
  scene.validate();
  return scene;
}

std::vector<SceneWindow> generate_dataset(const DatasetSpec& spec) {
  if (spec.kinds.empty()) throw ConfigError("dataset needs at least one scenario kind");
  if (spec.agents_min == 0 || spec.agents_max < spec.agents_min) {
    throw ConfigError("need 1 <= agents_min <= agents_max");
  }
  Rng rng(spec.seed);
  std::vector<SceneWindow> scenes;
  scenes.reserve(spec.num_scenes);
  for (std::size_t i = 0; i < spec.num_scenes; ++i) {
    ScenarioSpec s;
    s.kind = spec.kinds[rng.index(spec.kinds.size())];
    s.num_agents = spec.agents_min + rng.index(spec.agents_max - spec.agents_min + 1);
    s.seed = rng.next();
    s.noise = spec.noise;
    s.extent = spec.extent;
    s.image_size = spec.image_size;
    s.with_image = spec.with_image;
    s.t_hist = spec.t_hist;
    s.t_fut = spec.t_fut;
    char id[32];
    std::snprintf(id, sizeof id, "scene_%04zu", i);
    s.scene_id = id;
    scenes.push_back(synth_generate(s));
  }
  return scenes;
}

Split split_dataset(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
  }
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1 (got " + std::to_string(sum) + ")");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  const auto count = [&](double r) {
    return std::min(n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9)));
  };
  const std::size_t n_train = count(ratios[0]);
  const std::size_t n_val = std::min(n - n_train, count(ratios[1]));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
               idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  return s;
}

}  // namespace spectgnn
