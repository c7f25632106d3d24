#include <doctest.h>

#include <cmath>

#include "spectgnn/decoder.hpp"
#include "spectgnn/errors.hpp"
#include "spectgnn/gradcheck.hpp"
#include "spectgnn/ops.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace spectgnn;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

void randomize(ParamStore& store, Rng& rng) {
  for (const NamedParam& p : store.all()) {
    Tensor t = p.value;
    for (double& v : t.data_mut()) v = rng.uniform(-1, 1);
  }
}

}  // namespace

TEST_SUITE("decoder") {

TEST_CASE("tcnn_decode matches the loop definition, every small shape") {
  Rng rng(61);
  for (int variant = 0; variant < 3; ++variant)
    for (std::size_t Th = 1; Th <= 4; ++Th)
      for (std::size_t N = 1; N <= 4; ++N)
        for (std::size_t c = 1; c <= 3; ++c) {
          DecoderShape s;
          s.t_hist = Th;
          s.t_fut = 3;
          s.channels = c;
          s.residual_layers = 2;
          s.attention_width = variant == 0 ? 0 : 4;
          s.fusion = variant == 2 ? FusionMode::concat : FusionMode::add;
          ParamStore store;
          Initializer init(1);
          const DecoderParams p = DecoderParams::create(s, store, init);
          randomize(store, rng);
          const Tensor y = random_tensor(rng, {Th, N, c});
          const Tensor yst = variant == 0 ? Tensor{} : random_tensor(rng, {Th, N, 4});
          CHECK(max_abs_diff(tcnn_decode(y, yst, p), testing::oracle::decode(y, yst, p)) < 1e-10);
        }
}

TEST_CASE("zero residual weights leave the horizon map unchanged") {
  Rng rng(62);
  DecoderShape s;
  s.t_hist = 4;
  s.t_fut = 6;
  s.channels = 3;
  ParamStore store;
  Initializer init(2);
  const DecoderParams p = DecoderParams::create(s, store, init);
  randomize(store, rng);
  DecoderShape s0 = s;
  s0.residual_layers = 0;
  ParamStore store0;
  Initializer init0(2);
  const DecoderParams p0 = DecoderParams::create(s0, store0, init0);
  for (const NamedParam& np : store0.all()) {
    Tensor dst = np.value;
    const auto src = store.find(np.name)->data();
    std::copy(src.begin(), src.end(), dst.data_mut().begin());
  }
  for (const Tensor& k : p.kernels) {
    Tensor t = k;
    std::fill(t.data_mut().begin(), t.data_mut().end(), 0.0);
  }
  for (const Tensor& b : p.biases) {
    Tensor t = b;
    std::fill(t.data_mut().begin(), t.data_mut().end(), 0.0);
  }
  const Tensor y = random_tensor(rng, {4, 3, 3});
  CHECK(max_abs_diff(tcnn_decode(y, {}, p), tcnn_decode(y, {}, p0)) == 0.0);
}

TEST_CASE("tcnn_decode contract errors") {
  DecoderShape s;
  s.t_hist = 3;
  s.t_fut = 2;
  s.channels = 2;
  s.attention_width = 2;
  ParamStore store;
  Initializer init(3);
  const DecoderParams p = DecoderParams::create(s, store, init);
  CHECK_THROWS_AS(tcnn_decode(Tensor::zeros({4, 2, 2}), Tensor::zeros({4, 2, 2}), p), ContractError);
  CHECK_THROWS_AS(tcnn_decode(Tensor::zeros({3, 2, 2}), {}, p), ContractError);
  s.kernel = 2;
  CHECK_THROWS_AS(DecoderParams::create(s, store, init, "other"), ConfigError);
}

TEST_CASE("tcnn_decode is equivariant to agent permutation") {
  Rng rng(63);
  DecoderShape s;
  s.t_hist = 4;
  s.t_fut = 5;
  s.channels = 3;
  s.attention_width = 2;
  ParamStore store;
  Initializer init(4);
  const DecoderParams p = DecoderParams::create(s, store, init);
  const Tensor y = random_tensor(rng, {4, 3, 3}), yst = random_tensor(rng, {4, 3, 2});
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto permute_agents = [&](const Tensor& x) {
    const std::size_t T = x.size(0), N = x.size(1), C = x.size(2);
    std::vector<double> out(x.numel());
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < C; ++k) out[(t * N + n) * C + k] = x.data()[(t * N + perm[n]) * C + k];
    return Tensor::from_data(x.shape(), out);
  };
  CHECK(max_abs_diff(tcnn_decode(permute_agents(y), permute_agents(yst), p),
                     permute_agents(tcnn_decode(y, yst, p))) == 0.0);
}

TEST_CASE("gaussian head examples") {
  const Tensor raw = Tensor::from_data({1, 2, 5}, {1.0, -2.0, 0.0, std::log(3.0), 0.0,  //
                                                   0.5, 0.25, -1.0, 2.0, 30.0});
  const GaussianTrack g = gaussian_head(raw);
  CHECK(max_abs_diff(g.mean, {1.0, -2.0, 0.5, 0.25}) == 0.0);
  CHECK(g.sigma.data()[0] == 1.0);
  CHECK(g.sigma.data()[1] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(g.rho.data()[0] == 0.0);
  CHECK(g.rho_complement.data()[0] == doctest::Approx(1.0).epsilon(1e-15));
  // tanh(30) rounds to 1; the shrink keeps |rho| < 1 and the complement positive.
  CHECK(std::abs(g.rho.data()[1]) < 1.0);
  CHECK(g.rho_complement.data()[1] > 0.0);
  g.validate();
}

TEST_CASE("rho complement keeps relative precision") {
  for (double r = -45.0; r <= 45.0; r += 0.37) {
    const Tensor raw = Tensor::from_data({1, 1, 5}, {0, 0, 0, 0, r});
    const GaussianTrack g = gaussian_head(raw);
    const long double c = kRhoShrink;
    const long double th = std::tanh(static_cast<long double>(std::clamp(r, -40.0, 40.0)));
    const long double sech2 = 1.0L - th * th;
    // sech^2 in long double lacks precision for large |r|; use the exponential form there.
    const long double e = std::exp(-2.0L * std::abs(std::clamp(r, -40.0, 40.0)));
    const long double sech2_exp = 4.0L * e / ((1.0L + e) * (1.0L + e));
    const long double want = (1.0L - c * c) + c * c * (std::abs(r) > 5 ? sech2_exp : sech2);
    CHECK(std::abs(g.rho_complement.data()[0] - static_cast<double>(want)) / static_cast<double>(want) < 1e-13);
    CHECK(std::abs(g.rho.data()[0]) < 1.0);
  }
}

TEST_CASE("gaussian head bounds and gradient") {
  Rng rng(64);
  const Tensor raw = random_tensor(rng, {3, 2, 5}, -3, 3, true);
  const auto f = [](const Tensor& x) {
    const GaussianTrack g = gaussian_head(x);
    return add(add(sum(g.mean), sum(g.sigma)), add(sum(g.rho), sum(log(g.rho_complement))));
  };
  CHECK(grad_check(f, raw).max_rel_error < 1e-6);
  const GaussianTrack big = gaussian_head(Tensor::full({1, 1, 5}, 1e4));
  CHECK(std::isfinite(big.sigma.data()[0]));
  CHECK(big.sigma.data()[0] == doctest::Approx(std::exp(kLogSigmaBound)));
  CHECK_THROWS_AS(gaussian_head(Tensor::zeros({1, 1, 4})), DimensionError);
}

TEST_CASE("translate and validate") {
  const GaussianTrack g = gaussian_head(Tensor::zeros({2, 2, 5}));
  const GaussianTrack t = translate(g, {1.0, 2.0, -3.0, 0.5});
  CHECK(max_abs_diff(t.mean, {1, 2, -3, 0.5, 1, 2, -3, 0.5}) == 0.0);
  CHECK(t.sigma.data().data() == g.sigma.data().data());
  CHECK_THROWS_AS(translate(g, {1.0}), DimensionError);

  GaussianTrack bad = g;
  bad.sigma = Tensor::full({2, 2, 2}, -1.0);
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = g;
  bad.rho = Tensor::full({2, 2}, 1.0);
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = g;
  bad.mean = Tensor::full({2, 2, 2}, NAN);
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

}  // TEST_SUITE
