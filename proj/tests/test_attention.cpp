#include <doctest.h>

#include <cmath>

#include "spectgnn/attention.hpp"
#include "spectgnn/errors.hpp"
#include "spectgnn/gradcheck.hpp"
#include "spectgnn/ops.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace spectgnn;
using testing::max_abs_diff;
using testing::random_tensor;

TEST_SUITE("attention") {

TEST_CASE("multi-head attention matches the loop definition") {
  Rng rng(51);
  for (std::size_t heads = 1; heads <= 3; ++heads) {
    ParamStore store;
    Initializer init(heads);
    const auto p = AttentionParams::create(3, heads, 2, 4, store, init, "att");
    const Tensor x = random_tensor(rng, {2, 5, 3}, -2, 2);
    const AttentionResult r = multi_head_attention(x, p);
    CHECK(r.output.shape() == Shape{2, 5, heads * 4});
    CHECK(max_abs_diff(r.output, testing::oracle::attention(x.data(), 2, 5, 3, p)) < 1e-12);
    REQUIRE(r.weights.size() == heads);
    for (const Tensor& w : r.weights) {
      CHECK(w.shape() == Shape{2, 5, 5});
      for (std::size_t row = 0; row < 10; ++row) {
        double s = 0;
        for (std::size_t m = 0; m < 5; ++m) {
          CHECK(w.data()[row * 5 + m] > 0.0);
          s += w.data()[row * 5 + m];
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("single key attends with weight one") {
  ParamStore store;
  Initializer init(3);
  const auto p = AttentionParams::create(2, 2, 3, 2, store, init, "att");
  Rng rng(52);
  const Tensor x = random_tensor(rng, {4, 1, 2});
  const AttentionResult r = multi_head_attention(x, p);
  for (const Tensor& w : r.weights)
    for (double v : w.data()) CHECK(v == 1.0);
}

TEST_CASE("identical rows give uniform weights") {
  ParamStore store;
  Initializer init(4);
  const auto p = AttentionParams::create(2, 1, 2, 2, store, init, "att");
  const Tensor x = Tensor::from_data({1, 4, 2}, {0.3, -0.7, 0.3, -0.7, 0.3, -0.7, 0.3, -0.7});
  const AttentionResult r = multi_head_attention(x, p);
  for (double v : r.weights[0].data()) CHECK(std::abs(v - 0.25) < 1e-15);
}

TEST_CASE("statt matches the loop definition in both modes, every small shape") {
  Rng rng(53);
  for (STAttMode mode : {STAttMode::sequential, STAttMode::parallel})
    for (std::size_t T = 1; T <= 4; ++T)
      for (std::size_t N = 1; N <= 4; ++N)
        for (std::size_t c = 1; c <= 3; ++c) {
          ParamStore store;
          Initializer init(T * 100 + N * 10 + c);
          const auto p = STAttParams::create(c, 2, 2, c, mode, store, init);
          const Tensor y = random_tensor(rng, {T, N, c}, -2, 2);
          CHECK(max_abs_diff(statt(y, p), testing::oracle::statt(y, p)) < 1e-10);
        }
}

TEST_CASE("attention weight layouts") {
  ParamStore store;
  Initializer init(5);
  const auto p = AttentionParams::create(3, 2, 2, 3, store, init, "att");
  Rng rng(54);
  const Tensor y = random_tensor(rng, {6, 4, 3});
  CHECK(temporal_attention(y, p).weights[0].shape() == Shape{4, 6, 6});
  CHECK(spatial_attention(y, p).weights[0].shape() == Shape{6, 4, 4});
  CHECK_THROWS_AS(multi_head_attention(random_tensor(rng, {2, 3, 2}), p), DimensionError);
}

TEST_CASE("statt is permutation equivariant over agents") {
  ParamStore store;
  Initializer init(6);
  const auto p = STAttParams::create(3, 2, 3, 3, STAttMode::sequential, store, init);
  Rng rng(55);
  const std::size_t T = 5, N = 4;
  const Tensor y = random_tensor(rng, {T, N, 3});
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<double> yp(y.numel());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t k = 0; k < 3; ++k) yp[(t * N + n) * 3 + k] = y.data()[(t * N + perm[n]) * 3 + k];
  const Tensor a = statt(y, p), b = statt(Tensor::from_data({T, N, 3}, yp), p);
  const std::size_t w = a.size(2);
  double err = 0;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t k = 0; k < w; ++k)
        err = std::max(err, std::abs(b.data()[(t * N + n) * w + k] - a.data()[(t * N + perm[n]) * w + k]));
  CHECK(err < 1e-12);
}

TEST_CASE("statt gradient matches finite differences") {
  ParamStore store;
  Initializer init(7);
  const auto p = STAttParams::create(2, 2, 2, 2, STAttMode::sequential, store, init);
  Rng rng(56);
  const Tensor y = random_tensor(rng, {3, 3, 2}, -1, 1, true);
  const Tensor w = random_tensor(rng, {3, 3, 4});
  std::vector<Tensor> leaves = store.tensors();
  leaves.push_back(y);
  CHECK(grad_check([&] { return sum(mul(statt(y, p), w)); }, leaves).max_rel_error < 1e-5);
}

}  // TEST_SUITE
