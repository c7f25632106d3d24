#include <cstdio>
#include <functional>

#include "spectgnn/gradcheck.hpp"
#include "spectgnn/ops.hpp"
#include "spectgnn/rng.hpp"
#include "spectgnn/synth.hpp"
#include "spectgnn/training.hpp"

namespace spectgnn {

namespace {

constexpr double kPrimitiveTol = 1e-6;
constexpr double kCompositeTol = 1e-4;

std::string describe(const std::string& where, const GradCheckResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "[%zu] analytic %.6e numeric %.6e", r.worst_index, r.worst_analytic,
                r.worst_numeric);
  return where + buf;
}

class Suite {
 public:
  Suite(std::uint64_t seed, double h) : rng_(seed), h_(h) {}

  Tensor leaf(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(numel(shape));
    for (double& x : v) x = rng_.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(v), true);
  }

  // Fixed random weights so each output element gets a distinct sensitivity.
  Tensor weights(const Shape& shape) {
    std::vector<double> v(numel(shape));
    for (double& x : v) x = rng_.uniform(0.5, 1.5);
    return Tensor::from_data(shape, std::move(v));
  }

  void run(const std::string& name, double tol, const std::function<Tensor()>& out,
           const std::vector<Tensor>& leaves, std::size_t max_per_leaf = 0) {
    Tensor w;
    {
      NoGradGuard g;
      w = weights(out().shape());
    }
    const auto f = [&] { return sum(mul(out(), w)); };
    const GradCheckResult r = grad_check(f, leaves, h_, max_per_leaf);
    cases_.push_back({name, r.max_rel_error, tol, r.elements_checked,
                      describe("leaf " + std::to_string(r.worst_leaf), r)});
  }

  Rng& rng() { return rng_; }
  std::vector<GradCheckCase> take() { return std::move(cases_); }

 private:
  Rng rng_;
  double h_;
  std::vector<GradCheckCase> cases_;
};

Tensor symmetric(const Tensor& x) { return scale(add(x, transpose(x)), 0.5); }

}  // namespace

std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed, double h) {
  Suite s(seed, h);
  const double tp = kPrimitiveTol;

  {
    Tensor a = s.leaf({3, 4}), b = s.leaf({4});
    s.run("add", tp, [&] { return add(a, b); }, {a, b});
    s.run("sub", tp, [&] { return sub(a, b); }, {a, b});
    s.run("mul", tp, [&] { return mul(a, b); }, {a, b});
  }
  {
    Tensor a = s.leaf({3, 4}), b = s.leaf({3, 1}, 0.5, 2.0);
    s.run("div", tp, [&] { return div(a, b); }, {a, b});
  }
  {
    Tensor x = s.leaf({2, 5});
    s.run("scale", tp, [&] { return scale(x, -1.7); }, {x});
    s.run("exp", tp, [&] { return exp(x); }, {x});
    s.run("tanh", tp, [&] { return tanh(x); }, {x});
    s.run("sigmoid", tp, [&] { return sigmoid(x); }, {x});
    s.run("square", tp, [&] { return square(x); }, {x});
    s.run("clamp", tp, [&] { return clamp(x, -2.0, 2.0); }, {x});
    s.run("softmax", tp, [&] { return softmax(x, 1); }, {x});
    s.run("sum_axis", tp, [&] { return sum(x, 0); }, {x});
    s.run("mean_axis", tp, [&] { return mean(x, 1, true); }, {x});
    s.run("transpose", tp, [&] { return transpose(x); }, {x});
    s.run("slice", tp, [&] { return slice(x, 1, 1, 4); }, {x});
  }
  {
    Tensor x = s.leaf({2, 5}, 0.5, 2.0);
    s.run("log", tp, [&] { return log(x); }, {x});
    s.run("sqrt", tp, [&] { return sqrt(x); }, {x});
  }
  {
    Tensor x = s.leaf({3, 2, 4}), slope = s.leaf({4}, 0.1, 0.4);
    s.run("prelu", tp, [&] { return prelu(x, slope, 2); }, {x, slope});
    s.run("permute", tp, [&] { return permute(x, {2, 0, 1}); }, {x});
    s.run("reshape", tp, [&] { return reshape(x, {6, 4}); }, {x});
    Tensor y = s.leaf({3, 1, 4});
    s.run("concat", tp, [&] { return concat({x, y}, 1); }, {x, y});
  }
  {
    Tensor a = s.leaf({2, 3, 4}), b = s.leaf({4, 5});
    s.run("matmul", tp, [&] { return matmul(a, b); }, {a, b});
  }
  {
    Tensor x = s.leaf({5, 3, 2}), k = s.leaf({1, 3, 2, 4}), b = s.leaf({4});
    s.run("conv_time", tp, [&] { return conv_time(x, k, b); }, {x, k, b});
  }
  {
    Tensor x = s.leaf({2, 5, 6}), k = s.leaf({3, 2, 3, 3}), b = s.leaf({3});
    s.run("conv2d", tp, [&] { return conv2d(x, k, b); }, {x, k, b});
  }
  {
    Tensor f = s.leaf({3, 6, 7});
    const std::vector<Point2> pts{{0.3, 0.7}, {2.5, 4.25}, {5.9, 0.1}, {4.0, 3.0}};
    s.run("bilinear_sample", tp, [&] { return bilinear_sample(f, pts); }, {f});
  }
  {
    Tensor x = s.leaf({5, 5}, 0.1, 1.0);
    Tensor mask = Tensor::full({5, 5}, 1.0);
    for (std::size_t i = 0; i < 5; ++i) mask.data_mut()[i * 5 + i] = 0.0;
    s.run("normalized_laplacian", tp, [&] { return normalized_laplacian(mul(symmetric(x), mask)); }, {x});
  }
  {
    Tensor x = s.leaf({5, 5});
    s.run("eigh_values", kCompositeTol, [&] { return eigh(symmetric(x)).values; }, {x});
    s.run("eigh_vectors", kCompositeTol, [&] { return eigh(symmetric(x)).vectors; }, {x});
  }
  {
    Tensor v = s.leaf({4, 3, 2}), u = s.leaf({4, 3, 3});
    s.run("gft", tp, [&] { return gft(v, u); }, {v, u});
    s.run("igft", tp, [&] { return igft(v, u); }, {v, u});
  }
  {
    Tensor v = s.leaf({4, 3, 2}), theta = s.leaf({4, 5, 2, 3}), lam = s.leaf({4, 3}, 0.0, 2.0);
    s.run("sgconv", tp, [&] { return sgconv(v, theta, lam); }, {v, theta, lam});
  }
  {
    Tensor v = s.leaf({5, 3, 2});
    TGConvParams p{s.leaf({1, 3, 2, 4}), s.leaf({4}), s.leaf({1, 3, 2, 4}), s.leaf({4})};
    s.run("tgconv", tp, [&] { return tgconv(v, p); },
          {v, p.signal_kernel, p.signal_bias, p.gate_kernel, p.gate_bias});
  }
  {
    ParamStore store;
    Initializer init(s.rng().next());
    const STAttParams p = STAttParams::create(3, 2, 3, 3, STAttMode::sequential, store, init);
    Tensor y = s.leaf({4, 3, 3});
    std::vector<Tensor> leaves = store.tensors();
    leaves.push_back(y);
    s.run("statt", kCompositeTol, [&] { return statt(y, p); }, leaves);
  }
  {
    ParamStore store;
    Initializer init(s.rng().next());
    DecoderShape shape;
    shape.t_hist = 4;
    shape.t_fut = 6;
    shape.channels = 3;
    shape.attention_width = 4;
    shape.residual_layers = 2;
    const DecoderParams p = DecoderParams::create(shape, store, init);
    Tensor y = s.leaf({4, 2, 3}), yst = s.leaf({4, 2, 4});
    std::vector<Tensor> leaves = store.tensors();
    leaves.push_back(y);
    leaves.push_back(yst);
    s.run("tcnn_decode", kCompositeTol, [&] { return tcnn_decode(y, yst, p); }, leaves);
  }
  {
    Tensor raw = s.leaf({3, 2, 5});
    Tensor target = s.leaf({3, 2, 2}, -2.0, 2.0);
    target.set_requires_grad(false);
    s.run("loss_prob", kCompositeTol, [&] { return loss_prob(gaussian_head(raw), target); }, {raw});
    s.run("loss_dist", kCompositeTol, [&] { return loss_dist(gaussian_head(raw), target); }, {raw});
  }
  {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::crossing;
    spec.num_agents = 3;
    spec.seed = s.rng().next();
    spec.noise = 0.05;
    spec.t_hist = 8;
    spec.t_fut = 12;
    spec.image_size = 12;
    SceneWindow scene = synth_generate(spec);
    // Texture keeps conv pre-activations off the PReLU kink, which exact
    // zeros in a blank background would otherwise sit on.
    for (double& px : scene.image->pixels) px += 0.05 * s.rng().uniform();
    ModelConfig cfg;
    // Exact eigenvector derivative: at initialization the environment
    // spectrum is close to degenerate and the broadening bias
    // eps / gap^2 would dominate the comparison.
    cfg.eps_eig = 0.0;
    SpecTGNN model(cfg, s.rng().next());
    const PreparedScene prepared = prepare_scene(scene, cfg);
    const auto f = [&] {
      return loss_total(model.forward(prepared).track, prepared.target);
    };
    const GradCheckResult r = grad_check(f, model.params().tensors(), h, 24);
    GradCheckCase c{"full_model_loss", r.max_rel_error, kCompositeTol, r.elements_checked,
                    describe(model.params().all()[r.worst_leaf].name, r)};
    std::vector<GradCheckCase> out = s.take();
    out.push_back(c);
    return out;
  }
}

}  // namespace spectgnn
