#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spectgnn/model.hpp"

namespace spectgnn {

struct LossConfig {
  /// Weight of the distance term; must be >= 0.
  double lambda = 1.0;
};

/// Bivariate Gaussian negative log-likelihood of target [T_f, N, 2], summed
/// over steps and averaged over agents.
Tensor loss_prob(const GaussianTrack& track, const Tensor& target);
/// Squared error of the predicted mean, summed and divided by T_f * N.
Tensor loss_dist(const GaussianTrack& track, const Tensor& target);
Tensor loss_total(const GaussianTrack& track, const Tensor& target, const LossConfig& cfg = {});

/// p <- p - lr * g for every parameter. ContractError if any gradient is
/// missing.
void sgd_step(ParamStore& params, double lr);

/// Sampled trajectories, data[((k * T + t) * N + n) * 2 + {0, 1}].
struct Hypotheses {
  std::size_t k = 0;
  std::size_t steps = 0;
  std::size_t agents = 0;
  std::vector<double> data;

  Point2 at(std::size_t k_, std::size_t t, std::size_t n) const {
    const std::size_t i = ((k_ * steps + t) * agents + n) * 2;
    return {data[i], data[i + 1]};
  }
};

/// K draws per (step, agent) through the 2x2 Cholesky factor of each
/// covariance. Draw order is k, then t, then n, so the first K' samples of a
/// K-sample draw equal a K'-sample draw with the same seed.
Hypotheses sample_hypotheses(const GaussianTrack& track, std::size_t k, std::uint64_t seed);
/// The mean track as a single hypothesis.
Hypotheses mean_hypothesis(const GaussianTrack& track);

struct DisplacementError {
  /// Mean over agents of the per-agent minimum over the first K samples.
  double ade = 0.0;
  double fde = 0.0;
  std::vector<double> ade_per_agent;
  std::vector<double> fde_per_agent;
};

/// Uses the first k hypotheses. ContractError when k == 0 or k exceeds the
/// sample count.
DisplacementError min_displacement(const Hypotheses& samples, const Tensor& target, std::size_t k);
double min_ade(const Hypotheses& samples, const Tensor& target, std::size_t k);
double min_fde(const Hypotheses& samples, const Tensor& target, std::size_t k);

struct SceneMetrics {
  std::string scene_id;
  std::size_t num_agents = 0;
  std::vector<double> min_ade;  // aligned with MetricsReport::k_list
  std::vector<double> min_fde;
};

struct MetricsReport {
  std::vector<std::size_t> k_list;
  std::vector<SceneMetrics> scenes;
  /// Agent-weighted means over all scenes.
  std::vector<double> min_ade;
  std::vector<double> min_fde;

  double ade_at(std::size_t k) const;
  double fde_at(std::size_t k) const;
  /// Deterministic JSON text (no timestamps).
  std::string to_json() const;
};

/// Scene i is sampled with derive_seed(seed, i) and max(k_list) hypotheses;
/// smaller K use a prefix of that draw.
MetricsReport evaluate(const SpecTGNN& model, const std::vector<PreparedScene>& scenes,
                       const std::vector<std::size_t>& k_list, std::uint64_t seed);

struct TrainConfig {
  double lr = 0.01;
  std::size_t epochs = 250;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  LossConfig loss;
  /// Global norm clip applied to the averaged batch gradient; 0 disables.
  double grad_clip = 10.0;

  void validate() const;
};

struct EpochLoss {
  std::size_t epoch = 0;
  double prob = 0.0;  // mean over training scenes
  double dist = 0.0;
  double total = 0.0;
};

struct TrainLog {
  std::vector<EpochLoss> epochs;

  /// epoch,L_prob,L_dist,L_total
  std::string to_csv() const;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Mini-batch SGD over the scenes. Each epoch shuffles with a generator
/// seeded from cfg.seed; inside a batch scenes are ordered by agent count
/// and the gradient is averaged over scenes. NumericError names the epoch
/// and batch on a non-finite loss.
TrainLog fit(SpecTGNN& model, const std::vector<PreparedScene>& scenes, const TrainConfig& cfg,
             const EpochCallback& on_epoch = {});

/// JSON container: format tag, version, model config and every named
/// parameter with its shape and values.
void save_checkpoint(const SpecTGNN& model, const std::filesystem::path& path);
std::string checkpoint_json(const SpecTGNN& model);
SpecTGNN load_checkpoint(const std::filesystem::path& path);
SpecTGNN checkpoint_from_json(const std::string& text);

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t elements = 0;
  /// Location and values of the worst element, for reporting.
  std::string worst;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Finite-difference check of every differentiable primitive plus the full
/// model loss on a seeded three-agent crossing scene.
std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed, double h = 1e-5);

}  // namespace spectgnn
