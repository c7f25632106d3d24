#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spectgnn/errors.hpp"
#include "spectgnn/ops.hpp"
#include "spectgnn/rng.hpp"
#include "spectgnn/training.hpp"

namespace spectgnn {

namespace {

void check_target(const GaussianTrack& track, const Tensor& target, const char* who) {
  if (!target.defined() || target.shape() != track.mean.shape()) {
    throw DimensionError(std::string(who) + ": target " +
                         (target.defined() ? shape_str(target.shape()) : std::string("<none>")) +
                         " does not match prediction " + shape_str(track.mean.shape()));
  }
  for (double v : target.data()) {
    if (!std::isfinite(v)) throw DataError(std::string(who) + ": target contains non-finite values");
  }
}

Tensor channel(const Tensor& x, std::size_t c) {
  return reshape(slice(x, 2, c, c + 1), {x.size(0), x.size(1)});
}

}  // namespace

Tensor loss_prob(const GaussianTrack& track, const Tensor& target) {
  check_target(track, target, "loss_prob");
  track.validate();
  const double n = static_cast<double>(track.agents());
  const Tensor z = div(sub(target, track.mean), track.sigma);
  const Tensor zx = channel(z, 0), zy = channel(z, 1);
  const Tensor one_minus = track.rho_complement.defined() ? track.rho_complement
                                                          : add_scalar(neg(square(track.rho)), 1.0);
  // zx^2 + zy^2 - 2 rho zx zy = (zx - rho zy)^2 + (1 - rho^2) zy^2, with
  // zx - rho zy = (zx - zy) + zy (1 - rho^2) / (1 + rho) to avoid cancellation.
  const Tensor e = add(sub(zx, zy), div(mul(zy, one_minus), add_scalar(track.rho, 1.0)));
  const Tensor quad = add(div(square(e), one_minus), square(zy));
  const Tensor log_norm = add(sum(log(track.sigma), 2), scale(log(one_minus), 0.5));
  const Tensor nll = add_scalar(add(log_norm, scale(quad, 0.5)), std::log(2.0 * std::numbers::pi));
  return scale(sum(nll), 1.0 / n);
}

Tensor loss_dist(const GaussianTrack& track, const Tensor& target) {
  check_target(track, target, "loss_dist");
  const double denom = static_cast<double>(track.steps() * track.agents());
  return scale(sum(square(sub(target, track.mean))), 1.0 / denom);
}

Tensor loss_total(const GaussianTrack& track, const Tensor& target, const LossConfig& cfg) {
  if (!(cfg.lambda >= 0.0)) throw ConfigError("loss lambda must be non-negative");
  return add(loss_prob(track, target), scale(loss_dist(track, target), cfg.lambda));
}

void sgd_step(ParamStore& params, double lr) {
  for (const NamedParam& p : params.all()) {
    if (!p.value.has_grad()) throw ContractError("sgd_step: parameter '" + p.name + "' has no gradient");
  }
  for (const NamedParam& p : params.all()) {
    Tensor t = p.value;
    auto values = t.data_mut();
    const auto grad = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * grad[i];
  }
}

Hypotheses sample_hypotheses(const GaussianTrack& track, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ContractError("sample_hypotheses: K must be at least 1");
  track.validate();
  const std::size_t steps = track.steps(), agents = track.agents();
  const auto mu = track.mean.data(), sigma = track.sigma.data(), rho = track.rho.data();
  Hypotheses h{k, steps, agents, std::vector<double>(k * steps * agents * 2)};
  Rng rng(seed);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t n = 0; n < agents; ++n) {
        const std::size_t i = t * agents + n;
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double sx = sigma[2 * i], sy = sigma[2 * i + 1], r = rho[i];
        // Cholesky of [[sx^2, r sx sy], [r sx sy, sy^2]].
        const std::size_t o = ((s * steps + t) * agents + n) * 2;
        h.data[o] = mu[2 * i] + sx * z1;
        h.data[o + 1] = mu[2 * i + 1] + sy * (r * z1 + std::sqrt(1.0 - r * r) * z2);
      }
    }
  }
  return h;
}

Hypotheses mean_hypothesis(const GaussianTrack& track) {
  const auto mu = track.mean.data();
  return {1, track.steps(), track.agents(), std::vector<double>(mu.begin(), mu.end())};
}

DisplacementError min_displacement(const Hypotheses& samples, const Tensor& target, std::size_t k) {
  if (k == 0) throw ContractError("min_displacement: K must be at least 1");
  if (k > samples.k) {
    throw ContractError("min_displacement: K = " + std::to_string(k) + " but only " +
                        std::to_string(samples.k) + " samples");
  }
  const std::size_t steps = samples.steps, agents = samples.agents;
  if (target.shape() != Shape{steps, agents, 2}) {
    throw DimensionError("min_displacement: target " + shape_str(target.shape()) + " does not match samples");
  }
  const auto tgt = target.data();
  DisplacementError out;
  out.ade_per_agent.assign(agents, std::numeric_limits<double>::infinity());
  out.fde_per_agent.assign(agents, std::numeric_limits<double>::infinity());
  for (std::size_t n = 0; n < agents; ++n) {
    for (std::size_t s = 0; s < k; ++s) {
      double total = 0.0, last = 0.0;
      for (std::size_t t = 0; t < steps; ++t) {
        const Point2 p = samples.at(s, t, n);
        const std::size_t i = (t * agents + n) * 2;
        last = std::hypot(p.x - tgt[i], p.y - tgt[i + 1]);
        total += last;
      }
      out.ade_per_agent[n] = std::min(out.ade_per_agent[n], total / static_cast<double>(steps));
      out.fde_per_agent[n] = std::min(out.fde_per_agent[n], last);
    }
    out.ade += out.ade_per_agent[n];
    out.fde += out.fde_per_agent[n];
  }
  out.ade /= static_cast<double>(agents);
  out.fde /= static_cast<double>(agents);
  return out;
}

double min_ade(const Hypotheses& samples, const Tensor& target, std::size_t k) {
  return min_displacement(samples, target, k).ade;
}

double min_fde(const Hypotheses& samples, const Tensor& target, std::size_t k) {
  return min_displacement(samples, target, k).fde;
}

}  // namespace spectgnn
