#pragma once

#include <span>
#include <vector>

#include "spectgnn/tensor.hpp"

namespace spectgnn {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Elementwise arithmetic with numpy-style right-aligned broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor neg(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
/// Values outside [lo, hi] are clamped and receive zero gradient.
Tensor clamp(const Tensor& x, double lo, double hi);

/// Parametric ReLU: x for x >= 0, slope[c] * x otherwise, where c indexes
/// `axis` of x. slope has shape [x.size(axis)].
Tensor prelu(const Tensor& x, const Tensor& slope, std::size_t axis);

/// Batched matrix product a[..., m, k] x b[..., k, n]; batch axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
/// Swaps the last two axes.
Tensor transpose(const Tensor& x);
/// Half-open range [begin, end) along one axis.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis, bool keepdim = false);

/// Max-subtracted softmax along one axis.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Zero same-padded 1-D convolution along the leading (time) axis.
/// x: [T, N, c_in], kernel: [1, L, c_in, c_out] with L odd, bias: [c_out]
/// or undefined. Returns [T, N, c_out].
Tensor conv_time(const Tensor& x, const Tensor& kernel, const Tensor& bias = {});

/// Zero same-padded 2-D convolution. x: [C_in, H, W], kernel:
/// [C_out, C_in, kh, kw] with odd kh, kw, bias: [C_out] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias = {});

/// Bilinear interpolation of a [C, H, W] feature map at pixel coordinates
/// (x = column, y = row, pixel centers at integers). Returns [P, C].
/// Points outside [0, W-1] x [0, H-1] raise DataError.
Tensor bilinear_sample(const Tensor& features, std::span<const Point2> points);

}  // namespace spectgnn
