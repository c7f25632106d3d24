#include <doctest.h>

#include <cmath>
#include <numeric>

#include "spectgnn/errors.hpp"
#include "spectgnn/graphs.hpp"
#include "spectgnn/spectral.hpp"
#include "spectgnn/synth.hpp"
#include "support.hpp"

using namespace spectgnn;

namespace {

SceneWindow scene_from(const std::vector<std::vector<Point2>>& steps) {
  SceneWindow s;
  s.scene_id = "g";
  const std::size_t n = steps.front().size();
  for (std::size_t i = 0; i < n; ++i) s.agent_ids.push_back(static_cast<std::int64_t>(i));
  s.t_hist = steps.size();
  s.t_fut = 1;
  for (const auto& row : steps) s.history.insert(s.history.end(), row.begin(), row.end());
  return s;
}

Matrix weights(std::initializer_list<std::initializer_list<double>> rows) { return Matrix::from_rows(rows); }

// Independent scalar version of the encoder, written from its definition.
std::vector<double> reference_environment(const Raster& img, const std::vector<Point2>& px,
                                          const EncoderParams& p) {
  std::size_t c_in = 1, H = img.height, W = img.width;
  std::vector<double> x = img.pixels;
  for (std::size_t l = 0; l < 3; ++l) {
    const auto K = p.kernels[l].data();
    const std::size_t co = p.kernels[l].size(0), k = p.kernels[l].size(2);
    const long half = static_cast<long>(k / 2);
    std::vector<double> y(co * H * W);
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          double s = p.biases[l].data()[o];
          for (std::size_t c = 0; c < c_in; ++c)
            for (std::size_t a = 0; a < k; ++a)
              for (std::size_t b = 0; b < k; ++b) {
                const long r = static_cast<long>(i + a) - half, q = static_cast<long>(j + b) - half;
                if (r < 0 || q < 0 || r >= static_cast<long>(H) || q >= static_cast<long>(W)) continue;
                s += x[(c * H + r) * W + q] * K[((o * c_in + c) * k + a) * k + b];
              }
          y[(o * H + i) * W + j] = s >= 0 ? s : p.slopes[l].data()[o] * s;
        }
    x = std::move(y);
    c_in = co;
  }
  const std::size_t n = px.size(), d = p.config.embed_dim;
  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  for (std::size_t a = 0; a < n; ++a) {
    const double fx = std::floor(px[a].x), fy = std::floor(px[a].y);
    const std::size_t x0 = static_cast<std::size_t>(fx), y0 = static_cast<std::size_t>(fy);
    const std::size_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
    const double ax = px[a].x - fx, ay = px[a].y - fy;
    std::vector<double> feat(c_in);
    for (std::size_t c = 0; c < c_in; ++c) {
      const auto at = [&](std::size_t yy, std::size_t xx) { return x[(c * H + yy) * W + xx]; };
      feat[c] = (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x1)) + ay * ((1 - ax) * at(y1, x0) + ax * at(y1, x1));
    }
    for (std::size_t e = 0; e < d; ++e) {
      double s = p.embed_bias.data()[e];
      for (std::size_t c = 0; c < c_in; ++c) s += feat[c] * p.embed_weight.data()[c * d + e];
      z[a][e] = s;
    }
  }
  std::vector<double> w(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      double dot = 0;
      for (std::size_t e = 0; e < d; ++e) dot += z[a][e] * z[b][e];
      w[a * n + b] = 1.0 / (1.0 + std::exp(-dot / std::sqrt(static_cast<double>(d))));
    }
  return w;
}

SceneWindow image_scene(std::uint64_t seed, std::size_t agents, std::size_t size) {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::crossing;
  spec.num_agents = agents;
  spec.seed = seed;
  spec.image_size = size;
  return synth_generate(spec);
}

}  // namespace

TEST_SUITE("graphs") {

TEST_CASE("agent graph examples") {
  const SceneWindow s = scene_from({{{0, 0}, {3, 4}}});
  const auto g = build_agent_graph(s);
  REQUIRE(g.size() == 1);
  CHECK(g[0].values(0, 1) == 0.2);
  CHECK(g[0].values(1, 0) == 0.2);
  CHECK(g[0].values(0, 0) == 0.0);

  const auto same = build_agent_graph(scene_from({{{1, 1}, {1, 1}}}));
  CHECK(same[0].values(0, 1) == 1.0 / 1e-6);

  const auto single = build_agent_graph(scene_from({{{5, 5}}, {{6, 5}}}));
  REQUIRE(single.size() == 2);
  CHECK(single[1].values.rows() == 1);
  CHECK(single[1].values(0, 0) == 0.0);
}

TEST_CASE("agent graph rejects non-finite positions naming agent and step") {
  SceneWindow s = scene_from({{{0, 0}, {1, 1}}, {{0, 0}, {NAN, 1}}});
  s.agent_ids = {10, 42};
  try {
    build_agent_graph(s);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("42") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }
}

TEST_CASE("agent graph translation invariance and permutation equivariance") {
  Rng rng(21);
  std::vector<std::vector<Point2>> steps(4, std::vector<Point2>(5));
  // Coordinates on a 1/64 grid, so the shifted copies are exact.
  for (auto& row : steps)
    for (auto& p : row) p = {std::round(rng.uniform(-10, 10) * 64) / 64, std::round(rng.uniform(-10, 10) * 64) / 64};
  const auto base = build_agent_graph(scene_from(steps));

  auto shifted = steps;
  for (auto& row : shifted)
    for (auto& p : row) p = {p.x + 1024.0, p.y - 512.0};
  const auto moved = build_agent_graph(scene_from(shifted));
  for (std::size_t t = 0; t < 4; ++t) CHECK(moved[t].values == base[t].values);

  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  auto permuted = steps;
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t i = 0; i < 5; ++i) permuted[t][i] = steps[t][perm[i]];
  const auto pg = build_agent_graph(scene_from(permuted));
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) CHECK(pg[t].values(i, j) == base[t].values(perm[i], perm[j]));
}

TEST_CASE("normalized laplacian examples") {
  const LaplacianSet two = normalized_laplacian(WeightMatrix{weights({{0, 1}, {1, 0}})});
  CHECK(two.laplacian == weights({{1, -1}, {-1, 1}}));
  const SpectralBasis b2 = eigh_sym(two.laplacian);
  CHECK(b2.values[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(b2.values[1]) < 1e-14);

  const LaplacianSet iso = normalized_laplacian(WeightMatrix{Matrix(3, 3)});
  CHECK(iso.laplacian == Matrix::identity(3));

  const LaplacianSet k3 = normalized_laplacian(WeightMatrix{weights({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}})});
  const SpectralBasis b3 = eigh_sym(k3.laplacian);
  CHECK(b3.values[0] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(b3.values[1] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(std::abs(b3.values[2]) < 1e-14);

  CHECK_THROWS_AS(normalized_laplacian(WeightMatrix{weights({{0, 1}, {2, 0}})}), ContractError);
}

TEST_CASE("normalized laplacian properties on random graphs") {
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(9);
    Matrix e(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) e(i, j) = e(j, i) = rng.uniform(0.01, 3.0);
    const LaplacianSet ls = normalized_laplacian(WeightMatrix{e});
    CHECK(ls.laplacian.asymmetry() < 1e-10);
    // Independent construction from the definition.
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0;
      for (std::size_t j = 0; j < n; ++j) d += e(i, j);
      CHECK(ls.degree[i] == doctest::Approx(d).epsilon(1e-14));
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double want = (i == j ? 1.0 : 0.0) - e(i, j) / std::sqrt(ls.degree[i] * ls.degree[j]);
        CHECK(std::abs(ls.laplacian(i, j) - want) < 1e-14);
      }
    // sqrt(D) 1 is a null vector.
    double norm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0;
      for (std::size_t j = 0; j < n; ++j) r += ls.laplacian(i, j) * std::sqrt(ls.degree[j]);
      norm += r * r;
    }
    CHECK(std::sqrt(norm) < 1e-9);
    const SpectralBasis b = eigh_sym(ls.laplacian);
    for (double v : b.values) {
      CHECK(v >= -1e-9);
      CHECK(v <= 2.0 + 1e-9);
    }
  }
}

TEST_CASE("differentiable laplacian matches the matrix version") {
  Rng rng(23);
  Matrix e(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) e(i, j) = e(j, i) = rng.uniform(0.1, 2.0);
  const Tensor lt = normalized_laplacian(e.to_tensor());
  CHECK(Matrix::from_tensor(lt).max_abs_diff(normalized_laplacian(WeightMatrix{e}).laplacian) < 1e-15);
}

TEST_CASE("environment encoder matches scalar reference") {
  ParamStore store;
  Initializer init(5);
  EncoderConfig cfg;
  const EncoderParams p = EncoderParams::create(cfg, store, init);
  // Nonzero biases so every term of the reference is exercised.
  Rng rng(24);
  for (const auto& b : p.biases)
    for (double& v : Tensor(b).data_mut()) v = rng.uniform(-0.2, 0.2);
  for (double& v : Tensor(p.embed_bias).data_mut()) v = rng.uniform(-0.2, 0.2);

  const SceneWindow s = image_scene(31, 4, 16);
  const WeightMatrix w = encode_environment(s, p);
  const auto want = reference_environment(*s.image, agent_pixels(s), p);
  CHECK(testing::max_abs_diff(w.values.values(), want) < 1e-12);
  w.validate();
  CHECK(w.role == GraphRole::environment);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(w.values(i, j) == w.values(j, i));
}

TEST_CASE("environment encoder examples") {
  ParamStore store;
  Initializer init(6);
  const EncoderParams p = EncoderParams::create(EncoderConfig{}, store, init);

  SUBCASE("blank image gives equal off-diagonal weights") {
    SceneWindow s = image_scene(32, 3, 12);
    std::fill(s.image->pixels.begin(), s.image->pixels.end(), 0.0);
    const WeightMatrix w = encode_environment(s, p);
    CHECK(w.values(0, 1) == 0.5);  // sigmoid(0) since all features are exactly zero
    CHECK(w.values(0, 2) == w.values(1, 2));
  }
  SUBCASE("single agent") {
    const WeightMatrix w = encode_environment(image_scene(33, 1, 12), p);
    CHECK(w.values.rows() == 1);
    CHECK(w.values(0, 0) == 0.0);
  }
  SUBCASE("missing image is a configuration error") {
    SceneWindow s = image_scene(34, 2, 12);
    s.image.reset();
    CHECK_THROWS_AS(encode_environment(s, p), ConfigError);
  }
  SUBCASE("agent outside the image is a data error") {
    SceneWindow s = image_scene(35, 2, 12);
    s.image_transform.m[2] += 1000.0;
    CHECK_THROWS_AS(encode_environment(s, p), DataError);
  }
  SUBCASE("permuting agents conjugates the matrix") {
    SceneWindow s = image_scene(36, 4, 12);
    const WeightMatrix base = encode_environment(s, p);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    SceneWindow q = s;
    for (std::size_t t = 0; t < s.t_hist; ++t)
      for (std::size_t i = 0; i < 4; ++i) q.hist(t, i) = s.hist(t, perm[i]);
    const WeightMatrix w = encode_environment(q, p);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(w.values(i, j) == base.values(perm[i], perm[j]));
  }
}

}  // TEST_SUITE
