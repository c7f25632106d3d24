#pragma once

// Straight-line scalar reimplementations used as references by the unit and
// acceptance tests. They read tensors through data() only and share no code
// with the library's kernels.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "spectgnn/attention.hpp"
#include "spectgnn/decoder.hpp"
#include "spectgnn/spectral.hpp"

namespace testing::oracle {

using spectgnn::Tensor;

/// Y[t,i,k] = sum_j theta[t,i,j,k] * lambda_i * V_hat[t,i,j]; lambdas are [N] or [T, N].
inline std::vector<double> sgconv(const Tensor& vh, const Tensor& theta, const Tensor& lam) {
  const std::size_t T = vh.size(0), N = vh.size(1), ci = vh.size(2), nmax = theta.size(1), co = theta.size(3);
  const bool per_step = lam.dim() == 2;
  std::vector<double> y(T * N * co, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i) {
      const double l = lam.data()[per_step ? t * N + i : i];
      for (std::size_t k = 0; k < co; ++k)
        for (std::size_t j = 0; j < ci; ++j)
          y[(t * N + i) * co + k] += theta.data()[((t * nmax + i) * ci + j) * co + k] * l * vh.data()[(t * N + i) * ci + j];
    }
  return y;
}

/// Zero-padded temporal correlation with a [1, L, c_in, c_out] kernel.
inline std::vector<double> conv_time(std::span<const double> x, std::size_t T, std::size_t N, std::size_t ci,
                                     const Tensor& kernel, const Tensor& bias) {
  const std::size_t L = kernel.size(1), co = kernel.size(3);
  const long half = static_cast<long>(L / 2);
  std::vector<double> y(T * N * co, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t k = 0; k < co; ++k) {
        double acc = bias.defined() ? bias.data()[k] : 0.0;
        for (std::size_t l = 0; l < L; ++l) {
          const long src = static_cast<long>(t + l) - half;
          if (src < 0 || src >= static_cast<long>(T)) continue;
          for (std::size_t j = 0; j < ci; ++j)
            acc += x[(static_cast<std::size_t>(src) * N + n) * ci + j] * kernel.data()[(l * ci + j) * co + k];
        }
        y[(t * N + n) * co + k] = acc;
      }
  return y;
}

inline std::vector<double> tgconv(const Tensor& vh, const spectgnn::TGConvParams& p) {
  const std::size_t T = vh.size(0), N = vh.size(1), ci = vh.size(2);
  const auto s = conv_time(vh.data(), T, N, ci, p.signal_kernel, p.signal_bias);
  const auto g = conv_time(vh.data(), T, N, ci, p.gate_kernel, p.gate_bias);
  std::vector<double> y(s.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s[i] / (1.0 + std::exp(-g[i]));
  return y;
}

/// Multi-head attention over the middle axis of x: [B, L, c]; returns [B, L, heads*d_out].
inline std::vector<double> attention(std::span<const double> x, std::size_t B, std::size_t L, std::size_t c,
                                     const spectgnn::AttentionParams& p) {
  const std::size_t H = p.heads, dk = p.d_k, dv = p.d_out, W = H * dv;
  std::vector<double> out(B * L * W, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> cat(L * W, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      const auto Q = p.query[h].data(), K = p.key[h].data(), V = p.value[h].data();
      std::vector<double> q(L * dk, 0.0), k(L * dk, 0.0), v(L * dv, 0.0);
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t i = 0; i < c; ++i) {
          const double xv = x[(b * L + l) * c + i];
          for (std::size_t j = 0; j < dk; ++j) {
            q[l * dk + j] += xv * Q[i * dk + j];
            k[l * dk + j] += xv * K[i * dk + j];
          }
          for (std::size_t j = 0; j < dv; ++j) v[l * dv + j] += xv * V[i * dv + j];
        }
      for (std::size_t l = 0; l < L; ++l) {
        std::vector<double> s(L);
        double top = -INFINITY;
        for (std::size_t m = 0; m < L; ++m) {
          double d = 0;
          for (std::size_t j = 0; j < dk; ++j) d += q[l * dk + j] * k[m * dk + j];
          s[m] = d / std::sqrt(static_cast<double>(dk));
          top = std::max(top, s[m]);
        }
        double z = 0;
        for (double& e : s) z += (e = std::exp(e - top));
        for (std::size_t m = 0; m < L; ++m)
          for (std::size_t j = 0; j < dv; ++j) cat[l * W + h * dv + j] += s[m] / z * v[m * dv + j];
      }
    }
    const auto M = p.mix.data();
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t o = 0; o < W; ++o)
        for (std::size_t i = 0; i < W; ++i) out[(b * L + l) * W + o] += cat[l * W + i] * M[i * W + o];
  }
  return out;
}

/// [a, b, c] -> [b, a, c]
inline std::vector<double> swap01(std::span<const double> x, std::size_t a, std::size_t b, std::size_t c) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t k = 0; k < c; ++k) y[(j * a + i) * c + k] = x[(i * b + j) * c + k];
  return y;
}

inline std::vector<double> statt(const Tensor& y, const spectgnn::STAttParams& p) {
  const std::size_t T = y.size(0), N = y.size(1), c = y.size(2);
  const std::size_t wt = p.temporal.out_dim();
  const auto temporal = swap01(attention(swap01(y.data(), T, N, c), N, T, c, p.temporal), N, T, wt);
  if (p.mode == spectgnn::STAttMode::sequential) return attention(temporal, T, N, wt, p.spatial);
  const auto spatial = attention(y.data(), T, N, c, p.spatial);
  std::vector<double> sum(temporal.size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = temporal[i] + spatial[i];
  return sum;
}

inline double prelu(double x, double a) { return x >= 0 ? x : a * x; }

inline std::vector<double> decode(const Tensor& y, const Tensor& y_st, const spectgnn::DecoderParams& p) {
  using spectgnn::FusionMode;
  const spectgnn::DecoderShape& s = p.shape;
  const std::size_t Th = s.t_hist, Tf = s.t_fut, N = y.size(1), c = s.channels, a = s.attention_width;
  const std::size_t cf = p.fused_channels();
  std::vector<double> fused(Th * N * cf, 0.0);
  for (std::size_t t = 0; t < Th; ++t)
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t r = t * N + n;
      for (std::size_t k = 0; k < c; ++k) fused[r * cf + k] = y.data()[r * c + k];
      if (a == 0) continue;
      for (std::size_t j = 0; j < a; ++j) {
        const double v = y_st.data()[r * a + j];
        if (s.fusion == FusionMode::concat) {
          fused[r * cf + c + j] = v;
        } else {
          for (std::size_t k = 0; k < c; ++k) fused[r * cf + k] += v * p.fusion.data()[j * c + k];
        }
      }
    }
  constexpr std::size_t G = spectgnn::kGaussianChannels;
  std::vector<double> z(Tf * N * G, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < Tf; ++f)
      for (std::size_t g = 0; g < G; ++g) {
        double acc = p.horizon_bias.data()[f * G + g];
        for (std::size_t t = 0; t < Th; ++t)
          for (std::size_t k = 0; k < cf; ++k)
            acc += fused[(t * N + n) * cf + k] * p.horizon_weight.data()[(t * cf + k) * (Tf * G) + f * G + g];
        z[(f * N + n) * G + g] = prelu(acc, p.horizon_slope.data()[g]);
      }
  for (std::size_t l = 0; l < p.kernels.size(); ++l) {
    const auto conv = conv_time(z, Tf, N, G, p.kernels[l], p.biases[l]);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += prelu(conv[i], p.slopes[l].data()[i % G]);
  }
  return z;
}

/// Bivariate Gaussian negative log-likelihood from the density formula in
/// long double, summed over steps and averaged over agents.
inline double nll(const spectgnn::GaussianTrack& g, const Tensor& target) {
  const std::size_t T = g.steps(), N = g.agents();
  long double total = 0;
  for (std::size_t i = 0; i < T * N; ++i) {
    const long double sx = g.sigma.data()[2 * i], sy = g.sigma.data()[2 * i + 1], r = g.rho.data()[i];
    const long double zx = (target.data()[2 * i] - static_cast<long double>(g.mean.data()[2 * i])) / sx;
    const long double zy = (target.data()[2 * i + 1] - static_cast<long double>(g.mean.data()[2 * i + 1])) / sy;
    const long double om = 1 - r * r;
    total += std::log(2 * std::numbers::pi_v<long double> * sx * sy * std::sqrt(om)) +
             (zx * zx + zy * zy - 2 * r * zx * zy) / (2 * om);
  }
  return static_cast<double>(total / static_cast<long double>(N));
}

}  // namespace testing::oracle
