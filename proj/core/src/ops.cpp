#include "spectgnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "spectgnn/errors.hpp"

namespace spectgnn {

namespace {

using IndexMap = std::shared_ptr<const std::vector<std::size_t>>;

// Flat index into `in` for every flat index of `out`, with `in`
// right-aligned against `out` and size-1 axes broadcast.
std::vector<std::size_t> broadcast_map(const Shape& in, const Shape& out) {
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t d = in.size(); d-- > 0;) {
    stride[d + offset] = in[d] == 1 ? 0 : s;
    s *= in[d];
  }
  std::vector<std::size_t> map(numel(out));
  std::vector<std::size_t> idx(rank, 0);
  std::size_t cur = 0;
  for (std::size_t o = 0; o < map.size(); ++o) {
    map[o] = cur;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      cur += stride[d];
      if (idx[d] < out[d]) break;
      cur -= stride[d] * out[d];
      idx[d] = 0;
    }
  }
  return map;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                           shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA dfa, DB dfb) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), op);
  const std::size_t n = numel(out_shape);
  const bool same = a.shape() == out_shape && b.shape() == out_shape;
  IndexMap ma, mb;
  if (!same) {
    ma = std::make_shared<const std::vector<std::size_t>>(broadcast_map(a.shape(), out_shape));
    mb = std::make_shared<const std::vector<std::size_t>>(broadcast_map(b.shape(), out_shape));
  }
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(n);
  if (same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(A[i], B[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(A[(*ma)[i]], B[(*mb)[i]]);
  }
  return make_result(op, out_shape, std::move(out), {a, b},
                     [a, b, ma, mb, dfa, dfb](std::span<const double> y, std::span<const double> g) {
                       Tensor ta = a, tb = b;
                       auto A = ta.data();
                       auto B = tb.data();
                       const bool ra = ta.requires_grad(), rb = tb.requires_grad();
                       std::span<double> ga = ra ? ta.grad_mut() : std::span<double>{};
                       std::span<double> gb = rb ? tb.grad_mut() : std::span<double>{};
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const std::size_t ia = ma ? (*ma)[i] : i;
                         const std::size_t ib = mb ? (*mb)[i] : i;
                         if (ra) ga[ia] += g[i] * dfa(A[ia], B[ib], y[i]);
                         if (rb) gb[ib] += g[i] * dfb(A[ia], B[ib], y[i]);
                       }
                     });
}

template <class F, class D>
Tensor unary(const char* op, const Tensor& x, F f, D dfdx) {
  auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = f(X[i]);
  return make_result(op, x.shape(), std::move(out), {x},
                     [x, dfdx](std::span<const double> y, std::span<const double> g) {
                       Tensor t = x;
                       auto X = t.data();
                       auto gx = t.grad_mut();
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(X[i], y[i]);
                     });
}

// Gather-style op whose output element i reads input element map[i].
Tensor gather(const char* op, const Tensor& x, Shape out_shape, IndexMap map) {
  auto X = x.data();
  std::vector<double> out(map->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[(*map)[i]];
  return make_result(op, std::move(out_shape), std::move(out), {x},
                     [x, map](std::span<const double>, std::span<const double> g) {
                       Tensor t = x;
                       auto gx = t.grad_mut();
                       for (std::size_t i = 0; i < g.size(); ++i) gx[(*map)[i]] += g[i];
                     });
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.len = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      "add_scalar", x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) {
  return unary(
      "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
  return unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return v >= lo && v <= hi ? 1.0 : 0.0; });
}

Tensor prelu(const Tensor& x, const Tensor& slope, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "prelu");
  if (slope.shape() != Shape{s.len}) {
    throw DimensionError("prelu: slope shape " + shape_str(slope.shape()) + " for input " +
                         shape_str(x.shape()) + " along axis " + std::to_string(axis));
  }
  auto X = x.data();
  auto A = slope.data();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const std::size_t c = (i / s.inner) % s.len;
    out[i] = X[i] >= 0.0 ? X[i] : A[c] * X[i];
  }
  return make_result("prelu", x.shape(), std::move(out), {x, slope},
                     [x, slope, s](std::span<const double>, std::span<const double> g) {
                       Tensor tx = x, ta = slope;
                       auto X = tx.data();
                       auto A = ta.data();
                       std::span<double> gx = tx.requires_grad() ? tx.grad_mut() : std::span<double>{};
                       std::span<double> ga = ta.requires_grad() ? ta.grad_mut() : std::span<double>{};
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const std::size_t c = (i / s.inner) % s.len;
                         const bool pos = X[i] >= 0.0;
                         if (!gx.empty()) gx[i] += pos ? g[i] : A[c] * g[i];
                         if (!ga.empty() && !pos) ga[c] += X[i] * g[i];
                       }
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2 || sa[sa.size() - 1] != sb[sb.size() - 2]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(sa) + " and " +
                         shape_str(sb));
  }
  const std::size_t m = sa[sa.size() - 2], k = sa.back(), n = sb.back();
  const Shape batch_a(sa.begin(), sa.end() - 2);
  const Shape batch_b(sb.begin(), sb.end() - 2);
  Shape batch;
  try {
    batch = broadcast_shape(batch_a, batch_b, "matmul");
  } catch (const DimensionError&) {
    throw DimensionError("matmul: batch axes of " + shape_str(sa) + " and " + shape_str(sb) +
                         " do not broadcast");
  }
  auto ma = std::make_shared<const std::vector<std::size_t>>(broadcast_map(batch_a, batch));
  auto mb = std::make_shared<const std::vector<std::size_t>>(broadcast_map(batch_b, batch));
  const std::size_t nb = numel(batch);
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(nb * m * n, 0.0);
  for (std::size_t bi = 0; bi < nb; ++bi) {
    const double* pa = A.data() + (*ma)[bi] * m * k;
    const double* pb = B.data() + (*mb)[bi] * k * n;
    double* pc = out.data() + bi * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double av = pa[i * k + p];
        for (std::size_t j = 0; j < n; ++j) pc[i * n + j] += av * pb[p * n + j];
      }
    }
  }
  return make_result(
      "matmul", std::move(out_shape), std::move(out), {a, b},
      [a, b, ma, mb, nb, m, k, n](std::span<const double>, std::span<const double> g) {
        Tensor ta = a, tb = b;
        auto A = ta.data();
        auto B = tb.data();
        std::span<double> ga = ta.requires_grad() ? ta.grad_mut() : std::span<double>{};
        std::span<double> gb = tb.requires_grad() ? tb.grad_mut() : std::span<double>{};
        for (std::size_t bi = 0; bi < nb; ++bi) {
          const std::size_t oa = (*ma)[bi] * m * k;
          const std::size_t ob = (*mb)[bi] * k * n;
          const double* pg = g.data() + bi * m * n;
          if (!ga.empty()) {
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += pg[i * n + j] * B[ob + p * n + j];
                ga[oa + i * k + p] += acc;
              }
            }
          }
          if (!gb.empty()) {
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                const double av = A[oa + i * k + p];
                for (std::size_t j = 0; j < n; ++j) gb[ob + p * n + j] += av * pg[i * n + j];
              }
            }
          }
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {x},
                     [x](std::span<const double>, std::span<const double> g) {
                       Tensor t = x;
                       auto gx = t.grad_mut();
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const Shape& in = x.shape();
  if (order.size() != in.size()) {
    throw DimensionError("permute: order rank does not match shape " + shape_str(in));
  }
  std::vector<bool> seen(in.size(), false);
  for (std::size_t d : order) {
    if (d >= in.size() || seen[d]) throw DimensionError("permute: invalid axis order");
    seen[d] = true;
  }
  std::vector<std::size_t> in_stride(in.size(), 1);
  for (std::size_t d = in.size(); d-- > 1;) in_stride[d - 1] = in_stride[d] * in[d];
  Shape out_shape(in.size());
  std::vector<std::size_t> stride(in.size());
  for (std::size_t d = 0; d < in.size(); ++d) {
    out_shape[d] = in[order[d]];
    stride[d] = in_stride[order[d]];
  }
  auto map = std::make_shared<std::vector<std::size_t>>(numel(out_shape));
  std::vector<std::size_t> idx(in.size(), 0);
  std::size_t cur = 0;
  for (std::size_t o = 0; o < map->size(); ++o) {
    (*map)[o] = cur;
    for (std::size_t d = in.size(); d-- > 0;) {
      ++idx[d];
      cur += stride[d];
      if (idx[d] < out_shape[d]) break;
      cur -= stride[d] * out_shape[d];
      idx[d] = 0;
    }
  }
  return gather("permute", x, std::move(out_shape), std::move(map));
}

Tensor transpose(const Tensor& x) {
  const std::size_t r = x.dim();
  if (r < 2) throw DimensionError("transpose: needs rank >= 2, got " + shape_str(x.shape()));
  std::vector<std::size_t> order(r);
  for (std::size_t i = 0; i < r; ++i) order[i] = i;
  std::swap(order[r - 1], order[r - 2]);
  return permute(x, order);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (begin > end || end > s.len) {
    throw DimensionError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of bounds for shape " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  auto map = std::make_shared<std::vector<std::size_t>>();
  map->reserve(numel(out_shape));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = begin; l < end; ++l) {
      for (std::size_t i = 0; i < s.inner; ++i) map->push_back((o * s.len + l) * s.inner + i);
    }
  }
  return gather("slice", x, std::move(out_shape), std::move(map));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  Shape out_shape = parts.front().shape();
  split_axis(out_shape, axis, "concat");
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) {
      throw DimensionError("concat: rank mismatch " + shape_str(s) + " vs " +
                           shape_str(out_shape));
    }
    s[axis] = out_shape[axis];
    if (s != out_shape) {
      throw DimensionError("concat: shape " + shape_str(p.shape()) + " incompatible with " +
                           shape_str(parts.front().shape()) + " along axis " +
                           std::to_string(axis));
    }
    total += p.shape()[axis];
  }
  out_shape[axis] = total;
  const AxisSplit s = split_axis(out_shape, axis, "concat");
  std::vector<double> out(numel(out_shape));
  std::size_t base = 0;
  for (const Tensor& p : parts) {
    const std::size_t len = p.shape()[axis];
    auto P = p.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(P.data() + o * len * s.inner, len * s.inner,
                  out.data() + (o * s.len + base) * s.inner);
    }
    base += len;
  }
  return make_result("concat", out_shape, std::move(out), parts,
                     [parts, s, axis](std::span<const double>, std::span<const double> g) {
                       std::size_t base = 0;
                       for (Tensor p : parts) {
                         const std::size_t plen = p.shape()[axis];
                         if (p.requires_grad()) {
                           auto gp = p.grad_mut();
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             for (std::size_t i = 0; i < plen * s.inner; ++i) {
                               gp[o * plen * s.inner + i] += g[(o * s.len + base) * s.inner + i];
                             }
                           }
                         }
                         base += plen;
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_result("sum", {}, {acc}, {x},
                     [x](std::span<const double>, std::span<const double> g) {
                       Tensor t = x;
                       for (double& v : t.grad_mut()) v += g[0];
                     });
}

Tensor sum(const Tensor& x, std::size_t axis, bool keepdim) {
  const AxisSplit s = split_axis(x.shape(), axis, "sum");
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  auto X = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.len; ++l) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        out[o * s.inner + i] += X[(o * s.len + l) * s.inner + i];
      }
    }
  }
  return make_result("sum_axis", std::move(out_shape), std::move(out), {x},
                     [x, s](std::span<const double>, std::span<const double> g) {
                       Tensor t = x;
                       auto gx = t.grad_mut();
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t l = 0; l < s.len; ++l) {
                           for (std::size_t i = 0; i < s.inner; ++i) {
                             gx[(o * s.len + l) * s.inner + i] += g[o * s.inner + i];
                           }
                         }
                       }
                     });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean(const Tensor& x, std::size_t axis, bool keepdim) {
  const std::size_t len = x.size(axis);
  return scale(sum(x, axis, keepdim), 1.0 / static_cast<double>(len));
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double mx = X[base];
      for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, X[base + l * s.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double e = std::exp(X[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= z;
    }
  }
  return make_result("softmax", x.shape(), std::move(out), {x},
                     [x, s](std::span<const double> y, std::span<const double> g) {
                       Tensor t = x;
                       auto gx = t.grad_mut();
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t i = 0; i < s.inner; ++i) {
                           const std::size_t base = o * s.len * s.inner + i;
                           double dot = 0.0;
                           for (std::size_t l = 0; l < s.len; ++l) {
                             dot += g[base + l * s.inner] * y[base + l * s.inner];
                           }
                           for (std::size_t l = 0; l < s.len; ++l) {
                             const std::size_t k = base + l * s.inner;
                             gx[k] += y[k] * (g[k] - dot);
                           }
                         }
                       }
                     });
}

Tensor conv_time(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  const Shape& sx = x.shape();
  const Shape& sk = kernel.shape();
  if (sk.size() != 4 || sk[0] != 1) {
    throw DimensionError("conv_time: kernel must be [1, L, c_in, c_out], got " + shape_str(sk));
  }
  if (sk[1] % 2 == 0) {
    throw ConfigError("conv_time: kernel length must be odd, got " + std::to_string(sk[1]));
  }
  if (sx.size() != 3 || sx[2] != sk[2]) {
    throw DimensionError("conv_time: input " + shape_str(sx) + " does not match kernel " +
                         shape_str(sk));
  }
  const std::size_t T = sx[0], N = sx[1], ci = sx[2], L = sk[1], co = sk[3];
  if (bias.defined() && bias.shape() != Shape{co}) {
    throw DimensionError("conv_time: bias shape " + shape_str(bias.shape()) + " for " +
                         std::to_string(co) + " output channels");
  }
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(L / 2);
  auto X = x.data();
  auto K = kernel.data();
  std::vector<double> out(T * N * co, 0.0);
  if (bias.defined()) {
    auto Bv = bias.data();
    for (std::size_t r = 0; r < T * N; ++r) {
      for (std::size_t o = 0; o < co; ++o) out[r * co + o] = Bv[o];
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + l) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      for (std::size_t n = 0; n < N; ++n) {
        const double* px = X.data() + (static_cast<std::size_t>(src) * N + n) * ci;
        double* py = out.data() + (t * N + n) * co;
        for (std::size_t c = 0; c < ci; ++c) {
          const double xv = px[c];
          const double* pk = K.data() + (l * ci + c) * co;
          for (std::size_t o = 0; o < co; ++o) py[o] += xv * pk[o];
        }
      }
    }
  }
  return make_result(
      "conv_time", {T, N, co}, std::move(out), {x, kernel, bias},
      [x, kernel, bias, T, N, ci, L, co, half](std::span<const double>,
                                               std::span<const double> g) {
        Tensor tx = x, tk = kernel, tb = bias;
        auto X = tx.data();
        auto K = tk.data();
        std::span<double> gx = tx.requires_grad() ? tx.grad_mut() : std::span<double>{};
        std::span<double> gk = tk.requires_grad() ? tk.grad_mut() : std::span<double>{};
        if (tb.defined() && tb.requires_grad()) {
          auto gb = tb.grad_mut();
          for (std::size_t r = 0; r < T * N; ++r) {
            for (std::size_t o = 0; o < co; ++o) gb[o] += g[r * co + o];
          }
        }
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t l = 0; l < L; ++l) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + l) - half;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
            for (std::size_t n = 0; n < N; ++n) {
              const std::size_t xo = (static_cast<std::size_t>(src) * N + n) * ci;
              const double* pg = g.data() + (t * N + n) * co;
              for (std::size_t c = 0; c < ci; ++c) {
                const std::size_t ko = (l * ci + c) * co;
                if (!gx.empty()) {
                  double acc = 0.0;
                  for (std::size_t o = 0; o < co; ++o) acc += K[ko + o] * pg[o];
                  gx[xo + c] += acc;
                }
                if (!gk.empty()) {
                  const double xv = X[xo + c];
                  for (std::size_t o = 0; o < co; ++o) gk[ko + o] += xv * pg[o];
                }
              }
            }
          }
        }
      });
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  const Shape& sx = x.shape();
  const Shape& sk = kernel.shape();
  if (sk.size() != 4 || sx.size() != 3 || sx[0] != sk[1]) {
    throw DimensionError("conv2d: input " + shape_str(sx) + " does not match kernel " +
                         shape_str(sk));
  }
  if (sk[2] % 2 == 0 || sk[3] % 2 == 0) {
    throw ConfigError("conv2d: kernel extents must be odd, got " + shape_str(sk));
  }
  const std::size_t ci = sx[0], H = sx[1], W = sx[2];
  const std::size_t co = sk[0], kh = sk[2], kw = sk[3];
  if (bias.defined() && bias.shape() != Shape{co}) {
    throw DimensionError("conv2d: bias shape " + shape_str(bias.shape()) + " for " +
                         std::to_string(co) + " output channels");
  }
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto Hs = static_cast<std::ptrdiff_t>(H), Ws = static_cast<std::ptrdiff_t>(W);

  // Visits every (output pixel, input pixel, weight) triple with valid
  // in-bounds indices; rows are inner so the loop vectorizes.
  auto for_each_tap = [=](auto&& body) {
    for (std::size_t o = 0; o < co; ++o) {
      for (std::size_t c = 0; c < ci; ++c) {
        for (std::size_t u = 0; u < kh; ++u) {
          const std::ptrdiff_t du = static_cast<std::ptrdiff_t>(u) - ph;
          const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -du);
          const std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(Hs, Hs - du);
          for (std::size_t v = 0; v < kw; ++v) {
            const std::ptrdiff_t dv = static_cast<std::ptrdiff_t>(v) - pw;
            const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dv);
            const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(Ws, Ws - dv);
            const std::size_t kidx = ((o * ci + c) * kh + u) * kw + v;
            for (std::ptrdiff_t i = i0; i < i1; ++i) {
              const std::size_t yrow = (o * H + static_cast<std::size_t>(i)) * W;
              const std::size_t xrow = (c * H + static_cast<std::size_t>(i + du)) * W;
              body(kidx, yrow, xrow, j0, j1, dv);
            }
          }
        }
      }
    }
  };

  auto X = x.data();
  auto K = kernel.data();
  std::vector<double> out(co * H * W, 0.0);
  if (bias.defined()) {
    auto Bv = bias.data();
    for (std::size_t o = 0; o < co; ++o) std::fill_n(out.data() + o * H * W, H * W, Bv[o]);
  }
  for_each_tap([&](std::size_t kidx, std::size_t yrow, std::size_t xrow, std::ptrdiff_t j0,
                   std::ptrdiff_t j1, std::ptrdiff_t dv) {
    const double w = K[kidx];
    double* py = out.data() + yrow;
    const double* px = X.data() + xrow + dv;
    for (std::ptrdiff_t j = j0; j < j1; ++j) py[j] += w * px[j];
  });
  return make_result(
      "conv2d", {co, H, W}, std::move(out), {x, kernel, bias},
      [x, kernel, bias, for_each_tap, co, H, W](std::span<const double>,
                                                std::span<const double> g) {
        Tensor tx = x, tk = kernel, tb = bias;
        auto X = tx.data();
        auto K = tk.data();
        std::span<double> gx = tx.requires_grad() ? tx.grad_mut() : std::span<double>{};
        std::span<double> gk = tk.requires_grad() ? tk.grad_mut() : std::span<double>{};
        if (tb.defined() && tb.requires_grad()) {
          auto gb = tb.grad_mut();
          for (std::size_t o = 0; o < co; ++o) {
            double acc = 0.0;
            for (std::size_t p = 0; p < H * W; ++p) acc += g[o * H * W + p];
            gb[o] += acc;
          }
        }
        for_each_tap([&](std::size_t kidx, std::size_t yrow, std::size_t xrow, std::ptrdiff_t j0,
                         std::ptrdiff_t j1, std::ptrdiff_t dv) {
          const double* pg = g.data() + yrow;
          if (!gx.empty()) {
            const double w = K[kidx];
            double* pgx = gx.data() + xrow + dv;
            for (std::ptrdiff_t j = j0; j < j1; ++j) pgx[j] += w * pg[j];
          }
          if (!gk.empty()) {
            const double* px = X.data() + xrow + dv;
            double acc = 0.0;
            for (std::ptrdiff_t j = j0; j < j1; ++j) acc += px[j] * pg[j];
            gk[kidx] += acc;
          }
        });
      });
}

Tensor bilinear_sample(const Tensor& features, std::span<const Point2> points) {
  const Shape& sf = features.shape();
  if (sf.size() != 3) {
    throw DimensionError("bilinear_sample: features must be [C, H, W], got " + shape_str(sf));
  }
  const std::size_t C = sf[0], H = sf[1], W = sf[2];
  struct Tap {
    std::size_t idx[4];
    double w[4];
  };
  auto taps = std::make_shared<std::vector<Tap>>();
  taps->reserve(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    const double px = points[p].x, py = points[p].y;
    if (!std::isfinite(px) || !std::isfinite(py) || px < 0.0 || py < 0.0 ||
        px > static_cast<double>(W - 1) || py > static_cast<double>(H - 1)) {
      throw DataError("bilinear_sample: point " + std::to_string(p) + " at pixel (" +
                      std::to_string(px) + ", " + std::to_string(py) +
                      ") lies outside the " + std::to_string(W) + "x" + std::to_string(H) +
                      " image");
    }
    const std::size_t x0 = W > 1 ? std::min(static_cast<std::size_t>(px), W - 2) : 0;
    const std::size_t y0 = H > 1 ? std::min(static_cast<std::size_t>(py), H - 2) : 0;
    const std::size_t x1 = W > 1 ? x0 + 1 : 0;
    const std::size_t y1 = H > 1 ? y0 + 1 : 0;
    const double fx = px - static_cast<double>(x0);
    const double fy = py - static_cast<double>(y0);
    taps->push_back(Tap{{y0 * W + x0, y0 * W + x1, y1 * W + x0, y1 * W + x1},
                        {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy}});
  }
  auto F = features.data();
  std::vector<double> out(points.size() * C, 0.0);
  for (std::size_t p = 0; p < taps->size(); ++p) {
    const Tap& tap = (*taps)[p];
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int q = 0; q < 4; ++q) acc += tap.w[q] * F[c * H * W + tap.idx[q]];
      out[p * C + c] = acc;
    }
  }
  return make_result("bilinear_sample", {points.size(), C}, std::move(out), {features},
                     [features, taps, C, H, W](std::span<const double>, std::span<const double> g) {
                       Tensor t = features;
                       auto gf = t.grad_mut();
                       for (std::size_t p = 0; p < taps->size(); ++p) {
                         const Tap& tap = (*taps)[p];
                         for (std::size_t c = 0; c < C; ++c) {
                           for (int q = 0; q < 4; ++q) {
                             gf[c * H * W + tap.idx[q]] += tap.w[q] * g[p * C + c];
                           }
                         }
                       }
                     });
}

}  // namespace spectgnn
