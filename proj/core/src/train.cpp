#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spectgnn/errors.hpp"
#include "spectgnn/ops.hpp"
#include "spectgnn/rng.hpp"
#include "spectgnn/training.hpp"

namespace spectgnn {

namespace {

std::size_t k_index(const std::vector<std::size_t>& ks, std::size_t k) {
  const auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw ContractError("K = " + std::to_string(k) + " was not evaluated");
  return static_cast<std::size_t>(it - ks.begin());
}

void clip_gradients(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const NamedParam& p : params.all()) {
    for (double g : p.value.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double f = max_norm / norm;
  for (const NamedParam& p : params.all()) {
    Tensor t = p.value;
    for (double& g : t.grad_mut()) g *= f;
  }
}

}  // namespace

double MetricsReport::ade_at(std::size_t k) const { return min_ade[k_index(k_list, k)]; }
double MetricsReport::fde_at(std::size_t k) const { return min_fde[k_index(k_list, k)]; }

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["k_list"] = k_list;
  nlohmann::ordered_json agg = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    agg.push_back({{"k", k_list[i]}, {"min_ade", min_ade[i]}, {"min_fde", min_fde[i]}});
  }
  j["aggregate"] = agg;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const SceneMetrics& s : scenes) {
    per.push_back({{"scene_id", s.scene_id},
                   {"num_agents", s.num_agents},
                   {"min_ade", s.min_ade},
                   {"min_fde", s.min_fde}});
  }
  j["scenes"] = per;
  return j.dump(2) + "\n";
}

MetricsReport evaluate(const SpecTGNN& model, const std::vector<PreparedScene>& scenes,
                       const std::vector<std::size_t>& k_list, std::uint64_t seed) {
  if (k_list.empty()) throw ConfigError("evaluate: empty K list");
  for (std::size_t k : k_list) {
    if (k == 0) throw ConfigError("evaluate: K values must be at least 1");
  }
  const std::size_t k_max = *std::max_element(k_list.begin(), k_list.end());
  MetricsReport report;
  report.k_list = k_list;
  report.min_ade.assign(k_list.size(), 0.0);
  report.min_fde.assign(k_list.size(), 0.0);
  std::size_t agents = 0;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const PreparedScene& scene = scenes[i];
    if (!scene.target.defined()) {
      throw DataError("evaluate: scene '" + scene.scene_id + "' has no ground-truth future");
    }
    const ForwardPass pass = model.forward(scene);
    const Hypotheses samples = sample_hypotheses(pass.track, k_max, derive_seed(seed, i));
    SceneMetrics m{scene.scene_id, scene.num_agents, {}, {}};
    for (std::size_t ki = 0; ki < k_list.size(); ++ki) {
      const DisplacementError e = min_displacement(samples, scene.target, k_list[ki]);
      m.min_ade.push_back(e.ade);
      m.min_fde.push_back(e.fde);
      for (double v : e.ade_per_agent) report.min_ade[ki] += v;
      for (double v : e.fde_per_agent) report.min_fde[ki] += v;
    }
    agents += scene.num_agents;
    report.scenes.push_back(std::move(m));
  }
  if (agents > 0) {
    for (std::size_t ki = 0; ki < k_list.size(); ++ki) {
      report.min_ade[ki] /= static_cast<double>(agents);
      report.min_fde[ki] /= static_cast<double>(agents);
    }
  }
  return report;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(loss.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be non-negative");
}

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out << "epoch,L_prob,L_dist,L_total\n";
  char buf[128];
  for (const EpochLoss& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.prob, e.dist, e.total);
    out << buf;
  }
  return out.str();
}

TrainLog fit(SpecTGNN& model, const std::vector<PreparedScene>& scenes, const TrainConfig& cfg,
             const EpochCallback& on_epoch) {
  cfg.validate();
  if (scenes.empty()) throw DataError("fit: empty training split");
  for (const PreparedScene& s : scenes) {
    if (!s.target.defined()) throw DataError("fit: scene '" + s.scene_id + "' has no ground-truth future");
  }
  TrainLog log;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(scenes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  ParamStore& params = model.params();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    EpochLoss acc{epoch + 1, 0.0, 0.0, 0.0};
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      std::stable_sort(batch.begin(), batch.end(), [&](std::size_t a, std::size_t b) {
        return scenes[a].num_agents < scenes[b].num_agents;
      });
      params.zero_grads();
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        const PreparedScene& scene = scenes[idx];
        const ForwardPass pass = model.forward(scene);
        const auto raw = pass.raw.data();
        if (!std::all_of(raw.begin(), raw.end(), [](double v) { return std::isfinite(v); })) {
          throw NumericError("non-finite model output at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(batch_no + 1) + " (scene '" + scene.scene_id + "')");
        }
        const Tensor lp = loss_prob(pass.track, scene.target);
        const Tensor ld = loss_dist(pass.track, scene.target);
        const Tensor total = add(lp, scale(ld, cfg.loss.lambda));
        if (!std::isfinite(total.item())) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(batch_no + 1) + " (scene '" + scene.scene_id + "')");
        }
        backward(scale(total, inv));
        acc.prob += lp.item();
        acc.dist += ld.item();
        acc.total += total.item();
      }
      if (cfg.grad_clip > 0.0) clip_gradients(params, cfg.grad_clip);
      sgd_step(params, cfg.lr);
    }
    const double count = static_cast<double>(scenes.size());
    acc.prob /= count;
    acc.dist /= count;
    acc.total /= count;
    log.epochs.push_back(acc);
    if (on_epoch) on_epoch(acc);
  }
  return log;
}

}  // namespace spectgnn
