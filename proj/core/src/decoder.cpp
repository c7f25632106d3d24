#include "spectgnn/decoder.hpp"

#include <cmath>

#include "spectgnn/errors.hpp"
#include "spectgnn/ops.hpp"

namespace spectgnn {

void GaussianTrack::validate() const {
  if (mean.dim() != 3 || mean.size(2) != 2 || sigma.shape() != mean.shape() ||
      rho.shape() != Shape{mean.size(0), mean.size(1)}) {
    throw ContractError("gaussian track has inconsistent shapes");
  }
  for (double v : mean.data()) {
    if (!std::isfinite(v)) throw ContractError("gaussian track mean is not finite");
  }
  for (double v : sigma.data()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ContractError("gaussian track sigma must be positive and finite");
  }
  for (double v : rho.data()) {
    if (!(std::abs(v) < 1.0)) throw ContractError("gaussian track correlation must satisfy |rho| < 1");
  }
  if (rho_complement.defined()) {
    if (rho_complement.shape() != rho.shape()) throw ContractError("gaussian track has inconsistent shapes");
    for (double v : rho_complement.data()) {
      if (!(v > 0.0 && v <= 1.0)) throw ContractError("gaussian track 1 - rho^2 must lie in (0, 1]");
    }
  }
}

GaussianTrack gaussian_head(const Tensor& raw) {
  if (raw.dim() != 3 || raw.size(2) != kGaussianChannels) {
    throw DimensionError("gaussian_head: expected [T_f, N, 5], got " + shape_str(raw.shape()));
  }
  const std::size_t t = raw.size(0), n = raw.size(1);
  GaussianTrack track;
  track.mean = slice(raw, 2, 0, 2);
  track.sigma = exp(clamp(slice(raw, 2, 2, 4), -kLogSigmaBound, kLogSigmaBound));
  const Tensor r = reshape(slice(raw, 2, 4, 5), {t, n});
  track.rho = scale(tanh(r), kRhoShrink);
  // 1 - c^2 tanh^2 r = (1 - c^2) + c^2 sech^2 r, which keeps full relative
  // precision when |rho| is close to 1.
  const Tensor rc = clamp(r, -kLogSigmaBound, kLogSigmaBound);
  const Tensor cosh2 = square(add(exp(rc), exp(neg(rc))));
  track.rho_complement = add_scalar(scale(div(Tensor::full({t, n}, 4.0), cosh2), kRhoShrink * kRhoShrink),
                                    (1.0 - kRhoShrink) * (1.0 + kRhoShrink));
  return track;
}

GaussianTrack translate(const GaussianTrack& track, const std::vector<double>& offset_xy) {
  const std::size_t n = track.agents();
  if (offset_xy.size() != 2 * n) {
    throw DimensionError("translate: expected " + std::to_string(n) + " offsets");
  }
  GaussianTrack out = track;
  out.mean = add(track.mean, Tensor::from_data({1, n, 2}, offset_xy));
  return out;
}

std::size_t DecoderParams::fused_channels() const {
  if (shape.attention_width > 0 && shape.fusion == FusionMode::concat) {
    return shape.channels + shape.attention_width;
  }
  return shape.channels;
}

DecoderParams DecoderParams::create(const DecoderShape& shape, ParamStore& store,
                                    Initializer& init, const std::string& prefix) {
  if (shape.kernel % 2 == 0) throw ConfigError("decoder kernel size must be odd");
  if (shape.t_hist == 0 || shape.t_fut == 0 || shape.channels == 0) {
    throw ConfigError("decoder horizons and channel count must be positive");
  }
  DecoderParams p;
  p.shape = shape;
  constexpr std::size_t out = kGaussianChannels;
  if (shape.attention_width > 0 && shape.fusion == FusionMode::add) {
    p.fusion = store.add(prefix + ".fusion",
                         init.uniform_fan({shape.attention_width, shape.channels},
                                          shape.attention_width, shape.channels));
  }
  const std::size_t fan_in = shape.t_hist * p.fused_channels();
  const std::size_t fan_out = shape.t_fut * out;
  p.horizon_weight = store.add(prefix + ".horizon.weight",
                               init.uniform_fan({fan_in, fan_out}, fan_in, fan_out));
  p.horizon_bias = store.add(prefix + ".horizon.bias", init.constant({shape.t_fut, 1, out}, 0.0));
  p.horizon_slope = store.add(prefix + ".horizon.prelu", init.constant({out}, shape.prelu_init));
  for (std::size_t l = 0; l < shape.residual_layers; ++l) {
    const std::string tag = prefix + ".res" + std::to_string(l);
    const std::size_t k = shape.kernel;
    p.kernels.push_back(store.add(tag + ".weight", init.uniform_fan({1, k, out, out}, k * out, k * out)));
    p.biases.push_back(store.add(tag + ".bias", init.constant({out}, 0.0)));
    p.slopes.push_back(store.add(tag + ".prelu", init.constant({out}, shape.prelu_init)));
  }
  return p;
}

Tensor tcnn_decode(const Tensor& y, const Tensor& y_st, const DecoderParams& params) {
  const DecoderShape& s = params.shape;
  if (y.dim() != 3 || y.size(0) != s.t_hist || y.size(2) != s.channels) {
    throw ContractError("tcnn_decode: encoder output " + shape_str(y.shape()) + " does not match [" +
                        std::to_string(s.t_hist) + ", N, " + std::to_string(s.channels) + "]");
  }
  const std::size_t n = y.size(1);
  Tensor fused = y;
  if (s.attention_width > 0) {
    if (!y_st.defined() || y_st.shape() != Shape{s.t_hist, n, s.attention_width}) {
      throw ContractError("tcnn_decode: attention output " +
                          (y_st.defined() ? shape_str(y_st.shape()) : std::string("<none>")) +
                          " does not match encoder output " + shape_str(y.shape()));
    }
    fused = s.fusion == FusionMode::add ? add(y, matmul(y_st, params.fusion))
                                        : concat({y, y_st}, 2);
  } else if (y_st.defined()) {
    throw ContractError("tcnn_decode: decoder was built without an attention input");
  }
  const std::size_t c = params.fused_channels();
  const Tensor per_agent = reshape(permute(fused, {1, 0, 2}), {n, s.t_hist * c});
  Tensor z = reshape(matmul(per_agent, params.horizon_weight), {n, s.t_fut, kGaussianChannels});
  z = add(permute(z, {1, 0, 2}), params.horizon_bias);
  z = prelu(z, params.horizon_slope, 2);
  for (std::size_t l = 0; l < params.kernels.size(); ++l) {
    z = add(z, prelu(conv_time(z, params.kernels[l], params.biases[l]), params.slopes[l], 2));
  }
  return z;
}

}  // namespace spectgnn
