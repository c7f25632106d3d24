#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "spectgnn/tensor.hpp"

namespace spectgnn {

struct GradCheckResult {
  /// max over elements of |a - n| / max(|a|, |n|, 1e-8)
  double max_rel_error = 0.0;
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
};

/// Compares the analytic gradient of the scalar `f()` with respect to every
/// element of `leaves` against the central difference
/// (f(x+h) - f(x-h)) / 2h. `f` must read the leaves' current values and be
/// deterministic: two evaluations at the same point must agree bit for bit,
/// otherwise ContractError is raised. Leaf values are restored on return;
/// their gradients hold the analytic result.
///
/// With max_per_leaf > 0, larger leaves are probed at that many evenly spaced
/// entries with a nonzero analytic gradient plus four with a zero one.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                           double h = 1e-5, std::size_t max_per_leaf = 0);

/// Single-input form: f is applied to x (a requires_grad leaf).
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h = 1e-5);

}  // namespace spectgnn
