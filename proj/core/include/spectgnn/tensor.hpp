#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spectgnn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Called during the backward pass with the output's values and its
/// accumulated gradient. Implementations add into their inputs' grads.
using BackwardFn =
    std::function<void(std::span<const double> out_data, std::span<const double> out_grad)>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major double tensor participating in reverse-mode
/// differentiation. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Mutable view of the values. Intended for leaves (parameter updates,
  /// finite-difference perturbation); mutating an interior node does not
  /// invalidate gradients already recorded against it.
  std::span<double> data_mut();

  /// Gradient accumulator; empty when no gradient has been allocated.
  std::span<const double> grad() const;
  /// Allocates the accumulator if needed. Only valid when requires_grad().
  std::span<double> grad_mut();
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  const char* op_name() const;

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  /// New leaf with copied values and no history.
  Tensor detach() const;
  Tensor clone() const;

  /// Runs reverse-mode differentiation from this scalar.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(const char*, Shape, std::vector<double>, std::vector<Tensor>,
                            BackwardFn);
};

/// Creates the output node of a primitive. The backward function is kept
/// only when gradient recording is enabled and some input requires grad.
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, BackwardFn backward);

/// Whether primitives currently record their inputs for differentiation.
bool grad_enabled() noexcept;

/// Disables recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Reachable primitive applications of one output, in topological order
/// (inputs before the nodes that consume them).
class Tape {
 public:
  static Tape record(const Tensor& output);

  std::size_t size() const { return nodes_.size(); }
  std::span<const std::shared_ptr<detail::Node>> nodes() const { return nodes_; }

  /// Number of recorded applications per primitive name (leaves excluded).
  std::map<std::string, std::size_t> op_counts() const;

  /// Visits every node once in reverse order. Interior gradients are reset
  /// first; leaf gradients accumulate across calls.
  void backward();

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// dLoss/dLeaf for every requires_grad leaf reachable from the scalar loss.
void backward(const Tensor& loss);

}  // namespace spectgnn
