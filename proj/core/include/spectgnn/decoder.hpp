#pragma once

#include <string>
#include <vector>

#include "spectgnn/params.hpp"

namespace spectgnn {

/// Per-agent, per-future-step bivariate Gaussian.
struct GaussianTrack {
  Tensor mean;   // [T_f, N, 2]
  Tensor sigma;  // [T_f, N, 2], strictly positive
  Tensor rho;    // [T_f, N], |rho| < 1
  /// 1 - rho^2 computed without cancellation; optional, [T_f, N].
  Tensor rho_complement;

  std::size_t steps() const { return mean.size(0); }
  std::size_t agents() const { return mean.size(1); }

  /// ContractError unless shapes agree, sigma > 0, |rho| < 1 and all values finite.
  void validate() const;
};

inline constexpr std::size_t kGaussianChannels = 5;

/// Correlations are scaled by this factor so |rho| < 1 holds even where
/// tanh rounds to +-1 in double precision.
inline constexpr double kRhoShrink = 1.0 - 1e-6;
/// Bound on the log-scale channels before exponentiation.
inline constexpr double kLogSigmaBound = 40.0;

/// mean = channels 0,1; sigma = exp(channels 2,3); rho = tanh(channel 4).
GaussianTrack gaussian_head(const Tensor& raw);

/// Same track with the mean shifted by a per-agent offset ([N] points).
GaussianTrack translate(const GaussianTrack& track, const std::vector<double>& offset_xy);

enum class FusionMode { add, concat };

struct DecoderShape {
  std::size_t t_hist = 8;
  std::size_t t_fut = 12;
  std::size_t channels = 5;
  /// Width of the attention output; 0 when attention is disabled.
  std::size_t attention_width = 0;
  FusionMode fusion = FusionMode::add;
  std::size_t residual_layers = 5;
  std::size_t kernel = 3;
  double prelu_init = 0.25;
};

struct DecoderParams {
  DecoderShape shape;
  Tensor fusion;          // [attention_width, channels], add mode with attention only
  Tensor horizon_weight;  // [T_h * fused_channels, T_f * 5]
  Tensor horizon_bias;    // [T_f, 1, 5]
  Tensor horizon_slope;   // [5]
  std::vector<Tensor> kernels;  // [1, kernel, 5, 5] each
  std::vector<Tensor> biases;   // [5]
  std::vector<Tensor> slopes;   // [5]

  std::size_t fused_channels() const;

  static DecoderParams create(const DecoderShape& shape, ParamStore& store, Initializer& init,
                              const std::string& prefix = "decoder");
};

/// Fuses the encoder output y: [T_h, N, c] with the attention output
/// y_st: [T_h, N, attention_width] (may be undefined), maps history steps to
/// forecast steps treating time as channels, then applies the residual
/// temporal layers. Returns raw [T_f, N, 5].
Tensor tcnn_decode(const Tensor& y, const Tensor& y_st, const DecoderParams& params);

}  // namespace spectgnn
