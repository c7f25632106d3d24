#include "spectgnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "spectgnn/errors.hpp"

namespace spectgnn {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  const Tensor out = f();
  if (out.numel() != 1) {
    throw ContractError("grad_check: function must return a scalar, got " +
                        shape_str(out.shape()));
  }
  return out.item();
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

// All indices, or an evenly spaced subset of the nonzero-gradient entries
// plus a few zero-gradient ones.
std::vector<std::size_t> pick_elements(const std::vector<double>& analytic, std::size_t limit) {
  std::vector<std::size_t> all(analytic.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  if (limit == 0 || analytic.size() <= limit) return all;
  std::vector<std::size_t> nonzero, zero;
  for (std::size_t i = 0; i < analytic.size(); ++i) (analytic[i] != 0.0 ? nonzero : zero).push_back(i);
  auto spaced = [](const std::vector<std::size_t>& from, std::size_t count, std::vector<std::size_t>& out) {
    if (from.size() <= count) {
      out.insert(out.end(), from.begin(), from.end());
      return;
    }
    for (std::size_t k = 0; k < count; ++k) out.push_back(from[k * from.size() / count]);
  };
  std::vector<std::size_t> out;
  spaced(nonzero, limit, out);
  spaced(zero, 4, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                           double h, std::size_t max_per_leaf) {
  if (!(h > 0.0)) throw ContractError("grad_check: step h must be positive");
  for (Tensor& leaf : leaves) {
    if (!leaf.is_leaf() || !leaf.requires_grad()) {
      throw ContractError("grad_check: every checked tensor must be a requires_grad leaf");
    }
    leaf.zero_grad();
  }

  const double v0 = evaluate(f);
  const double v1 = evaluate(f);
  if (!bit_equal(v0, v1)) {
    throw ContractError("grad_check: function is not deterministic (" + std::to_string(v0) +
                        " vs " + std::to_string(v1) + ")");
  }

  const Tensor loss = f();
  if (loss.numel() != 1) {
    throw ContractError("grad_check: function must return a scalar");
  }
  backward(loss);

  GradCheckResult result;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    const std::vector<double> analytic = leaf.has_grad()
                                             ? std::vector<double>(leaf.grad().begin(),
                                                                   leaf.grad().end())
                                             : std::vector<double>(leaf.numel(), 0.0);
    auto values = leaf.data_mut();
    for (const std::size_t i : pick_elements(analytic, max_per_leaf)) {
      const double saved = values[i];
      values[i] = saved + h;
      const double fp = evaluate(f);
      values[i] = saved - h;
      const double fm = evaluate(f);
      values[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.elements_checked;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = std::isfinite(err) ? err : INFINITY;
        result.worst_leaf = li;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h) {
  return grad_check([&f, &x]() { return f(x); }, std::vector<Tensor>{x}, h);
}

}  // namespace spectgnn
