#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spectgnn/errors.hpp"
#include "spectgnn/gradcheck.hpp"
#include "spectgnn/synth.hpp"
#include "spectgnn/training.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace spectgnn;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

GaussianTrack plain_track(Rng& rng, std::size_t T, std::size_t N, double rho_max = 0.9) {
  GaussianTrack g;
  g.mean = random_tensor(rng, {T, N, 2}, -3, 3);
  g.sigma = random_tensor(rng, {T, N, 2}, 0.2, 2.0);
  g.rho = random_tensor(rng, {T, N}, -rho_max, rho_max);
  return g;
}

ModelConfig small_config() {
  ModelConfig c;
  c.t_hist = 4;
  c.t_fut = 3;
  c.n_max = 4;
  c.c_out = 3;
  c.num_units = 1;
  c.decoder_layers = 2;
  c.encoder.channels = {2, 2, 2};
  return c;
}

std::vector<PreparedScene> small_scenes(const ModelConfig& cfg, std::size_t count, std::uint64_t seed) {
  DatasetSpec d;
  d.num_scenes = count;
  d.seed = seed;
  d.agents_min = 2;
  d.agents_max = 3;
  d.image_size = 10;
  d.t_hist = cfg.t_hist;
  d.t_fut = cfg.t_fut;
  std::vector<PreparedScene> out;
  for (const SceneWindow& s : generate_dataset(d)) out.push_back(prepare_scene(s, cfg));
  return out;
}

Hypotheses hand_hypotheses(std::size_t k, std::size_t T, std::size_t N, const std::vector<double>& data) {
  return {k, T, N, data};
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("loss_prob matches the density formula, every small shape") {
  Rng rng(71);
  for (std::size_t T = 1; T <= 4; ++T)
    for (std::size_t N = 1; N <= 4; ++N) {
      const GaussianTrack g = plain_track(rng, T, N);
      const Tensor target = random_tensor(rng, {T, N, 2}, -4, 4);
      const double want = testing::oracle::nll(g, target);
      CHECK(std::abs(loss_prob(g, target).item() - want) < 1e-10 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("loss_prob example: standard normal at the mean") {
  GaussianTrack g;
  g.mean = Tensor::zeros({1, 1, 2});
  g.sigma = Tensor::full({1, 1, 2}, 1.0);
  g.rho = Tensor::zeros({1, 1});
  CHECK(loss_prob(g, Tensor::zeros({1, 1, 2})).item() == doctest::Approx(std::log(2 * std::numbers::pi)));
  // Summed over steps, averaged over agents.
  g.mean = Tensor::zeros({3, 2, 2});
  g.sigma = Tensor::full({3, 2, 2}, 1.0);
  g.rho = Tensor::zeros({3, 2});
  CHECK(loss_prob(g, Tensor::zeros({3, 2, 2})).item() == doctest::Approx(3 * std::log(2 * std::numbers::pi)));
}

TEST_CASE("loss_prob stays accurate at saturated correlation") {
  for (double r : {5.0, 10.0, 18.0, 25.0}) {
    const GaussianTrack g = gaussian_head(Tensor::from_data({1, 1, 5}, {0, 0, 0, 0, r}));
    const Tensor target = Tensor::from_data({1, 1, 2}, {0.3, 0.3 + 1e-7});
    const long double c = kRhoShrink;
    const long double e = std::exp(-2.0L * r);
    const long double om = (1 - c * c) + c * c * 4 * e / ((1 + e) * (1 + e));
    const long double rho = c * std::tanh(static_cast<long double>(r));
    const long double zx = 0.3L, zy = static_cast<long double>(0.3 + 1e-7);
    const long double want = std::log(2 * std::numbers::pi_v<long double>) + 0.5L * std::log(om) +
                             (zx * zx + zy * zy - 2 * rho * zx * zy) / (2 * om);
    CHECK(std::abs(loss_prob(g, target).item() - static_cast<double>(want)) < 1e-6 * std::abs(static_cast<double>(want)));
  }
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(72);
  const Tensor raw = random_tensor(rng, {3, 2, 5}, -1.5, 1.5, true);
  const Tensor target = random_tensor(rng, {3, 2, 2}, -2, 2);
  CHECK(grad_check([&](const Tensor& x) { return loss_total(gaussian_head(x), target, {0.7}); }, raw)
            .max_rel_error < 1e-6);
}

TEST_CASE("loss_dist and loss_total") {
  GaussianTrack g;
  g.mean = Tensor::from_data({2, 1, 2}, {0, 0, 1, 1});
  g.sigma = Tensor::full({2, 1, 2}, 1.0);
  g.rho = Tensor::zeros({2, 1});
  const Tensor target = Tensor::from_data({2, 1, 2}, {3, 4, 1, 1});
  CHECK(loss_dist(g, target).item() == doctest::Approx(12.5));
  CHECK(loss_total(g, target, {2.0}).item() ==
        doctest::Approx(loss_prob(g, target).item() + 25.0));
  CHECK_THROWS_AS(loss_total(g, target, {-1.0}), ConfigError);
  CHECK_THROWS_AS(loss_dist(g, Tensor::zeros({1, 1, 2})), DimensionError);
  CHECK_THROWS_AS(loss_prob(g, Tensor::full({2, 1, 2}, NAN)), DataError);
}

TEST_CASE("sampling nests prefixes and matches the covariance") {
  Rng rng(73);
  const GaussianTrack g = plain_track(rng, 2, 2);
  const Hypotheses big = sample_hypotheses(g, 20, 9), small = sample_hypotheses(g, 5, 9);
  CHECK(std::equal(small.data.begin(), small.data.end(), big.data.begin()));
  CHECK(sample_hypotheses(g, 20, 9).data == big.data);
  CHECK(sample_hypotheses(g, 20, 10).data != big.data);
  CHECK_THROWS_AS(sample_hypotheses(g, 0, 1), ContractError);

  const std::size_t K = 40000;
  const Hypotheses h = sample_hypotheses(g, K, 3);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t n = 0; n < 2; ++n) {
      const std::size_t i = t * 2 + n;
      double mx = 0, my = 0;
      for (std::size_t k = 0; k < K; ++k) {
        mx += h.at(k, t, n).x;
        my += h.at(k, t, n).y;
      }
      mx /= K;
      my /= K;
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const Point2 p = h.at(k, t, n);
        vx += (p.x - mx) * (p.x - mx);
        vy += (p.y - my) * (p.y - my);
        cxy += (p.x - mx) * (p.y - my);
      }
      vx /= K;
      vy /= K;
      cxy /= K;
      const double sx = g.sigma.data()[2 * i], sy = g.sigma.data()[2 * i + 1];
      // Five standard errors.
      CHECK(std::abs(mx - g.mean.data()[2 * i]) < 5 * sx / std::sqrt(K));
      CHECK(std::abs(my - g.mean.data()[2 * i + 1]) < 5 * sy / std::sqrt(K));
      CHECK(std::abs(vx / (sx * sx) - 1) < 5 * std::sqrt(2.0 / K));
      CHECK(std::abs(vy / (sy * sy) - 1) < 5 * std::sqrt(2.0 / K));
      CHECK(std::abs(cxy / (sx * sy) - g.rho.data()[i]) < 5 * std::sqrt(2.0 / K));
    }
}

TEST_CASE("min displacement examples") {
  // One agent, two steps, target (0,0) then (3,4).
  const Tensor target = Tensor::from_data({2, 1, 2}, {0, 0, 3, 4});
  const Hypotheses h = hand_hypotheses(2, 2, 1, {0, 0, 0, 0,    // sample 0: stays at origin
                                                 1, 0, 3, 4});  // sample 1: exact at the end
  CHECK(min_ade(h, target, 1) == doctest::Approx(2.5));
  CHECK(min_fde(h, target, 1) == doctest::Approx(5.0));
  CHECK(min_ade(h, target, 2) == doctest::Approx(0.5));
  CHECK(min_fde(h, target, 2) == 0.0);
  CHECK_THROWS_AS(min_ade(h, target, 3), ContractError);
  CHECK_THROWS_AS(min_ade(h, target, 0), ContractError);
  CHECK(min_ade(mean_hypothesis(gaussian_head(Tensor::zeros({2, 1, 5}))), Tensor::zeros({2, 1, 2}), 1) == 0.0);
}

TEST_CASE("min displacement matches brute force and is monotone in K") {
  Rng rng(74);
  const std::size_t T = 4, N = 3, K = 12;
  const GaussianTrack g = plain_track(rng, T, N);
  const Tensor target = random_tensor(rng, {T, N, 2}, -3, 3);
  const Hypotheses h = sample_hypotheses(g, K, 5);
  double prev_ade = INFINITY, prev_fde = INFINITY;
  for (std::size_t k = 1; k <= K; ++k) {
    double ade = 0, fde = 0;
    for (std::size_t n = 0; n < N; ++n) {
      double best_a = INFINITY, best_f = INFINITY;
      for (std::size_t s = 0; s < k; ++s) {
        double a = 0;
        for (std::size_t t = 0; t < T; ++t)
          a += std::hypot(h.at(s, t, n).x - target.data()[(t * N + n) * 2],
                          h.at(s, t, n).y - target.data()[(t * N + n) * 2 + 1]);
        best_a = std::min(best_a, a / T);
        best_f = std::min(best_f, std::hypot(h.at(s, T - 1, n).x - target.data()[((T - 1) * N + n) * 2],
                                             h.at(s, T - 1, n).y - target.data()[((T - 1) * N + n) * 2 + 1]));
      }
      ade += best_a / N;
      fde += best_f / N;
    }
    const DisplacementError d = min_displacement(h, target, k);
    CHECK(d.ade == doctest::Approx(ade).epsilon(1e-12));
    CHECK(d.fde == doctest::Approx(fde).epsilon(1e-12));
    CHECK(d.ade <= prev_ade);
    CHECK(d.fde <= prev_fde);
    prev_ade = d.ade;
    prev_fde = d.fde;
  }
}

TEST_CASE("sgd step") {
  ParamStore store;
  const Tensor a = store.add("a", Tensor::from_data({2}, {1.0, 2.0}, true));
  const Tensor b = store.add("b", Tensor::from_data({1}, {-1.0}, true));
  CHECK_THROWS_AS(sgd_step(store, 0.1), ContractError);
  backward(add(sum(scale(a, 3.0)), sum(square(b))));
  sgd_step(store, 0.5);
  CHECK(max_abs_diff(a, {-0.5, 0.5}) == 0.0);
  CHECK(max_abs_diff(b, {0.0}) == 0.0);
}

TEST_CASE("fit: zero epochs, determinism and loss decrease") {
  const ModelConfig cfg = small_config();
  const auto scenes = small_scenes(cfg, 6, 3);
  TrainConfig tc;
  tc.epochs = 0;
  tc.batch_size = 3;
  SpecTGNN untouched(cfg, 5), trained0(cfg, 5);
  CHECK(fit(trained0, scenes, tc).epochs.empty());
  CHECK(checkpoint_json(trained0) == checkpoint_json(untouched));

  tc.epochs = 15;
  tc.lr = 0.005;
  SpecTGNN m1(cfg, 5), m2(cfg, 5);
  std::size_t calls = 0;
  const TrainLog l1 = fit(m1, scenes, tc, [&](const EpochLoss& e) { CHECK(e.epoch == ++calls); });
  const TrainLog l2 = fit(m2, scenes, tc);
  CHECK(calls == 15);
  CHECK(l1.to_csv() == l2.to_csv());
  CHECK(checkpoint_json(m1) == checkpoint_json(m2));
  CHECK(l1.epochs.back().total < l1.epochs.front().total);
  CHECK(l1.to_csv().rfind("epoch,L_prob,L_dist,L_total\n1,", 0) == 0);
  for (const EpochLoss& e : l1.epochs)
    CHECK(e.total == doctest::Approx(e.prob + tc.loss.lambda * e.dist).epsilon(1e-12));
}

TEST_CASE("fit errors") {
  const ModelConfig cfg = small_config();
  auto scenes = small_scenes(cfg, 2, 4);
  SpecTGNN model(cfg, 1);
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(fit(model, {}, tc), DataError);
  tc.lr = 0;
  CHECK_THROWS_AS(fit(model, scenes, tc), ConfigError);
  tc.lr = 0.01;
  Tensor bias = *model.params().find("decoder.horizon.bias");
  bias.data_mut()[0] = NAN;
  try {
    fit(model, scenes, tc);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
  scenes[0].target = Tensor{};
  CHECK_THROWS_AS(fit(model, scenes, tc), DataError);
}

TEST_CASE("checkpoint round trip") {
  const ModelConfig cfg = small_config();
  const auto scenes = small_scenes(cfg, 1, 6);
  SpecTGNN model(cfg, 8);
  const std::string text = checkpoint_json(model);
  const SpecTGNN back = checkpoint_from_json(text);
  CHECK(checkpoint_json(back) == text);
  CHECK(max_abs_diff(back.forward(scenes[0]).raw, model.forward(scenes[0]).raw) == 0.0);

  testing::TempDir dir("ckpt");
  save_checkpoint(model, dir / "m.json");
  CHECK(checkpoint_json(load_checkpoint(dir / "m.json")) == text);

  CHECK_THROWS_AS(checkpoint_from_json("{not json"), DataError);
  CHECK_THROWS_AS(checkpoint_from_json(R"({"format":"other"})"), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), DataError);
}

TEST_CASE("evaluate") {
  const ModelConfig cfg = small_config();
  const auto scenes = small_scenes(cfg, 4, 7);
  const SpecTGNN model(cfg, 2);
  const MetricsReport r = evaluate(model, scenes, {1, 3, 5}, 11);
  CHECK(r.scenes.size() == 4);
  CHECK(r.ade_at(5) <= r.ade_at(3));
  CHECK(r.ade_at(3) <= r.ade_at(1));
  CHECK(r.to_json() == evaluate(model, scenes, {1, 3, 5}, 11).to_json());
  CHECK_THROWS_AS(r.ade_at(2), ContractError);
  CHECK_THROWS_AS(evaluate(model, scenes, {}, 1), ConfigError);

  // Agent-weighted aggregate.
  double num = 0, den = 0;
  for (const SceneMetrics& s : r.scenes) {
    num += s.min_ade[0] * static_cast<double>(s.num_agents);
    den += static_cast<double>(s.num_agents);
  }
  CHECK(r.ade_at(1) == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("gradient check suite passes at seed 0") {
  for (const GradCheckCase& c : gradcheck_suite(0)) {
    INFO(c.name << " " << c.worst);
    CHECK(c.passed());
  }
}

}  // TEST_SUITE
