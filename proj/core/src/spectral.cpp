#include "spectgnn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectgnn/errors.hpp"
#include "spectgnn/ops.hpp"

namespace spectgnn {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (i != j) s += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(s);
}

double frobenius(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

SpectralBasis eigh_sym(const Matrix& input, const JacobiOptions& options) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw ContractError("eigh_sym: matrix must be square");
  for (double v : input.values()) {
    if (!std::isfinite(v)) throw ContractError("eigh_sym: matrix has non-finite entries");
  }
  if (input.asymmetry() > options.symmetry_tolerance) {
    throw ContractError("eigh_sym: matrix is not symmetric (max deviation " +
                        std::to_string(input.asymmetry()) + ")");
  }
  Matrix a = input;
  // Work on the exactly symmetrized matrix so rotations see one value per pair.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = m;
      a(j, i) = m;
    }
  }
  Matrix v = Matrix::identity(n);
  const double threshold = options.tolerance * std::max(1.0, frobenius(a));

  // One sweep past the threshold: convergence is quadratic, so the residual
  // drops to rounding level and the result no longer depends on which sweep
  // happened to cross the threshold.
  int sweep = 0;
  bool polished = false;
  while (true) {
    if (off_diagonal_norm(a) < threshold) {
      if (polished) break;
      polished = true;
    }
    if (sweep++ >= options.max_sweeps) {
      if (polished) break;
      throw NumericError("eigh_sym: Jacobi did not converge in " +
                         std::to_string(options.max_sweeps) + " sweeps (off-diagonal norm " +
                         std::to_string(off_diagonal_norm(a)) + ")");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&a](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SpectralBasis basis{Matrix(n, n), std::vector<double>(n)};
  for (std::size_t col = 0; col < n; ++col) {
    const std::size_t src = order[col];
    basis.values[col] = a(src, src);
    double sign = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (std::abs(v(k, src)) > 1e-12) {
        sign = v(k, src) > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t k = 0; k < n; ++k) basis.vectors(k, col) = sign * v(k, src);
  }
  return basis;
}

EighTensors eigh(const Tensor& a, EigGradMode mode, double eps_eig,
                 const JacobiOptions& options) {
  if (a.dim() != 2 || a.size(0) != a.size(1)) {
    throw DimensionError("eigh: expected square matrix, got " + shape_str(a.shape()));
  }
  const std::size_t n = a.size(0);
  const SpectralBasis basis = eigh_sym(Matrix::from_tensor(a), options);
  std::vector<double> vec(basis.vectors.values().begin(), basis.vectors.values().end());
  if (mode == EigGradMode::blocked || !a.requires_grad() || !grad_enabled()) {
    return {Tensor::from_data({n, n}, std::move(vec)), Tensor::from_data({n}, basis.values)};
  }
  // Both outputs live in one node ([N*N vectors | N values]) so a single
  // backward call sees the gradient of each.
  std::vector<double> packed = vec;
  packed.insert(packed.end(), basis.values.begin(), basis.values.end());
  Tensor joint = make_result(
      "eigh", {n * n + n}, std::move(packed), {a},
      [a, n, eps_eig](std::span<const double> y, std::span<const double> g) {
        Tensor ta = a;
        const double* U = y.data();
        const double* lam = y.data() + n * n;
        const double* gU = g.data();
        const double* glam = g.data() + n * n;
        // inner = diag(glam) + F o (U^T gU)
        std::vector<double> inner(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
              inner[i * n + j] = glam[i];
              continue;
            }
            double utg = 0.0;
            for (std::size_t k = 0; k < n; ++k) utg += U[k * n + i] * gU[k * n + j];
            const double gap = lam[j] - lam[i];
            const double denom = gap * gap + eps_eig;
            // Exactly repeated eigenvalues without broadening: drop the pair.
            inner[i * n + j] = denom > 0.0 ? gap / denom * utg : 0.0;
          }
        }
        // grad = U inner U^T, symmetrized.
        std::vector<double> tmp(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t p = 0; p < n; ++p) {
            const double u = U[i * n + p];
            for (std::size_t j = 0; j < n; ++j) tmp[i * n + j] += u * inner[p * n + j];
          }
        }
        std::vector<double> full(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += tmp[i * n + p] * U[j * n + p];
            full[i * n + j] = acc;
          }
        }
        auto ga = ta.grad_mut();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            ga[i * n + j] += 0.5 * (full[i * n + j] + full[j * n + i]);
          }
        }
      });
  return {reshape(slice(joint, 0, 0, n * n), {n, n}), slice(joint, 0, n * n, n * n + n)};
}

namespace {

void check_basis(const Tensor& v, const Tensor& u, const char* op) {
  if (v.dim() != 3) throw DimensionError(std::string(op) + ": signal must be [T, N, c], got " + shape_str(v.shape()));
  const std::size_t t = v.size(0), n = v.size(1);
  const bool shared = u.dim() == 2 && u.size(0) == n && u.size(1) == n;
  const bool per_step = u.dim() == 3 && u.size(0) == t && u.size(1) == n && u.size(2) == n;
  if (!shared && !per_step) {
    throw DimensionError(std::string(op) + ": basis " + shape_str(u.shape()) +
                        " does not match signal " + shape_str(v.shape()));
  }
}

}  // namespace

Tensor gft(const Tensor& v, const Tensor& u) {
  check_basis(v, u, "gft");
  return matmul(transpose(u), v);
}

Tensor igft(const Tensor& v_hat, const Tensor& u) {
  check_basis(v_hat, u, "igft");
  return matmul(u, v_hat);
}

Tensor pin_null_modes(const Tensor& values) {
  std::vector<double> mask(values.numel(), 1.0);
  bool any = false;
  const auto v = values.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (std::abs(v[i]) < kNullModeTolerance) {
      mask[i] = 0.0;
      any = true;
    }
  }
  if (!any) return values;
  return mul(values, Tensor::from_data(values.shape(), std::move(mask)));
}

void pin_null_modes(std::vector<double>& values) {
  for (double& v : values) {
    if (std::abs(v) < kNullModeTolerance) v = 0.0;
  }
}

Tensor sgconv(const Tensor& v_hat, const Tensor& theta, const Tensor& lambdas) {
  if (v_hat.dim() != 3) {
    throw DimensionError("sgconv: spectral signal must be [T, N, c_in], got " +
                         shape_str(v_hat.shape()));
  }
  const std::size_t t = v_hat.size(0), n = v_hat.size(1), ci = v_hat.size(2);
  if (theta.dim() != 4 || theta.size(0) != t || theta.size(2) != ci) {
    throw DimensionError("sgconv: kernel " + shape_str(theta.shape()) +
                         " does not match spectral signal " + shape_str(v_hat.shape()));
  }
  const std::size_t n_max = theta.size(1), co = theta.size(3);
  if (n > n_max) {
    throw CapacityError("sgconv: scene has " + std::to_string(n) +
                        " agents but the kernel holds N_max = " + std::to_string(n_max) +
                        "; re-run with a larger n_max");
  }
  Tensor lam;
  if (lambdas.shape() == Shape{n}) {
    lam = reshape(lambdas, {1, n, 1});
  } else if (lambdas.shape() == Shape{t, n}) {
    lam = reshape(lambdas, {t, n, 1});
  } else {
    throw DimensionError("sgconv: eigenvalues " + shape_str(lambdas.shape()) +
                         " do not match spectral signal " + shape_str(v_hat.shape()));
  }
  const Tensor kernel = n == n_max ? theta : slice(theta, 1, 0, n);
  const Tensor scaled = reshape(mul(v_hat, lam), {t, n, 1, ci});
  return reshape(matmul(scaled, kernel), {t, n, co});
}

Tensor tgconv(const Tensor& v_hat, const TGConvParams& params) {
  const Tensor signal = conv_time(v_hat, params.signal_kernel, params.signal_bias);
  const Tensor gate = conv_time(v_hat, params.gate_kernel, params.gate_bias);
  return mul(signal, sigmoid(gate));
}

BlockParams create_block(const UnitShape& shape, ParamStore& store, Initializer& init,
                         const std::string& prefix) {
  if (shape.tg_kernel % 2 == 0) throw ConfigError("TGConv kernel length must be odd");
  BlockParams block;
  block.theta = store.add(prefix + ".theta",
                          init.uniform_fan({shape.t_hist, shape.n_max, shape.c_in, shape.c_out},
                                           shape.c_in, shape.c_out));
  if (shape.tgconv) {
    const std::size_t l = shape.tg_kernel;
    TGConvParams tg;
    tg.signal_kernel = store.add(prefix + ".tg.signal", init.uniform_fan({1, l, shape.c_in, shape.c_out},
                                                                          l * shape.c_in, l * shape.c_out));
    tg.signal_bias = store.add(prefix + ".tg.signal_bias", init.constant({shape.c_out}, 0.0));
    tg.gate_kernel = store.add(prefix + ".tg.gate", init.uniform_fan({1, l, shape.c_in, shape.c_out},
                                                                      l * shape.c_in, l * shape.c_out));
    tg.gate_bias = store.add(prefix + ".tg.gate_bias", init.constant({shape.c_out}, 0.0));
    block.temporal = std::move(tg);
  }
  return block;
}

UnitParams create_unit(const UnitShape& shape, ParamStore& store, Initializer& init,
                       const std::string& prefix) {
  UnitParams unit;
  unit.agent = create_block(shape, store, init, prefix + ".agent");
  if (shape.environment) unit.environment = create_block(shape, store, init, prefix + ".env");
  return unit;
}

Tensor spectgnn_block(const Tensor& v, const BlockBasis& basis, const BlockParams& params) {
  const Tensor v_hat = gft(v, basis.vectors);
  Tensor y = sgconv(v_hat, params.theta, basis.values);
  if (params.temporal) y = add(y, tgconv(v_hat, *params.temporal));
  return igft(y, basis.vectors);
}

Tensor spectgnn_unit(const Tensor& v, const BlockBasis& agent_basis,
                     const std::optional<BlockBasis>& environment_basis,
                     const UnitParams& params) {
  Tensor y = spectgnn_block(v, agent_basis, params.agent);
  if (params.environment && environment_basis) {
    y = add(y, spectgnn_block(v, *environment_basis, *params.environment));
  }
  return y;
}

}  // namespace spectgnn
