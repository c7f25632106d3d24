#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spectgnn/matrix.hpp"
#include "spectgnn/params.hpp"

namespace spectgnn {

/// Eigenpairs of a symmetric matrix. Columns of `vectors` are orthonormal
/// eigenvectors; `values` are sorted descending; the first component of
/// each eigenvector with magnitude above 1e-12 is positive.
struct SpectralBasis {
  Matrix vectors;
  std::vector<double> values;
};

struct JacobiOptions {
  double tolerance = 1e-12;
  int max_sweeps = 50;
  double symmetry_tolerance = 1e-10;
};

/// Cyclic Jacobi eigendecomposition. ContractError for asymmetric input,
/// NumericError when the off-diagonal norm does not fall below tolerance
/// within max_sweeps.
SpectralBasis eigh_sym(const Matrix& a, const JacobiOptions& options = {});

enum class EigGradMode { broadened, blocked };

struct EighTensors {
  Tensor vectors;  // [N, N], eigenvectors as columns
  Tensor values;   // [N], descending
};

/// Differentiable eigendecomposition of an [N, N] symmetric tensor. In
/// broadened mode the backward pass uses gap factors
/// (l_j - l_i) / ((l_j - l_i)^2 + eps_eig); blocked mode returns constants.
EighTensors eigh(const Tensor& a, EigGradMode mode = EigGradMode::broadened,
                 double eps_eig = 1e-8, const JacobiOptions& options = {});

/// Normalized-Laplacian eigenvalues below this magnitude are null modes.
inline constexpr double kNullModeTolerance = 1e-10;

/// Sets eigenvalues with |lambda| < kNullModeTolerance to exactly zero. A
/// null eigenvalue of a normalized Laplacian is identically zero, so its
/// derivative is dropped as well; the computed value is rounding noise.
Tensor pin_null_modes(const Tensor& values);
void pin_null_modes(std::vector<double>& values);

/// Graph Fourier transform along the node axis: Y[t] = U[t]^T V[t].
/// v: [T, N, c]; u: [N, N] shared by every step or [T, N, N] per step.
Tensor gft(const Tensor& v, const Tensor& u);
/// Inverse transform: V[t] = U[t] Y[t].
Tensor igft(const Tensor& v_hat, const Tensor& u);

/// Per-eigenmode spectral filtering:
/// Y[t, i, k] = sum_j theta[t, i, j, k] * lambda[t, i] * V_hat[t, i, j].
/// v_hat: [T, N, c_in]; theta: [T, N_max, c_in, c_out] (sliced to N);
/// lambdas: [N] (shared) or [T, N]. CapacityError when N > N_max.
Tensor sgconv(const Tensor& v_hat, const Tensor& theta, const Tensor& lambdas);

struct TGConvParams {
  Tensor signal_kernel;  // [1, L, c_in, c_out]
  Tensor signal_bias;    // [c_out]
  Tensor gate_kernel;    // [1, L, c_in, c_out]
  Tensor gate_bias;      // [c_out]
};

/// Gated temporal convolution: conv(signal) * sigmoid(conv(gate)).
Tensor tgconv(const Tensor& v_hat, const TGConvParams& params);

struct BlockParams {
  Tensor theta;
  std::optional<TGConvParams> temporal;  // absent when TGConv is ablated
};

struct UnitParams {
  BlockParams agent;
  std::optional<BlockParams> environment;
};

struct UnitShape {
  std::size_t t_hist = 8;
  std::size_t n_max = 16;
  std::size_t c_in = 2;
  std::size_t c_out = 5;
  std::size_t tg_kernel = 3;
  bool tgconv = true;
  bool environment = true;
};

BlockParams create_block(const UnitShape& shape, ParamStore& store, Initializer& init,
                         const std::string& prefix);
UnitParams create_unit(const UnitShape& shape, ParamStore& store, Initializer& init,
                       const std::string& prefix);

/// Spectral basis tensors one block operates on.
struct BlockBasis {
  Tensor vectors;  // [N, N] or [T, N, N]
  Tensor values;   // [N] or [T, N]
};

/// Y = IGFT(SGConv(GFT(V)) + TGConv(GFT(V))) on one basis.
Tensor spectgnn_block(const Tensor& v, const BlockBasis& basis, const BlockParams& params);

/// Y = Y^a + Y^e, or Y^a alone when the unit has no environment block or
/// no environment basis is supplied.
Tensor spectgnn_unit(const Tensor& v, const BlockBasis& agent_basis,
                     const std::optional<BlockBasis>& environment_basis,
                     const UnitParams& params);

}  // namespace spectgnn
