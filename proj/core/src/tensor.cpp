#include "spectgnn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "spectgnn/errors.hpp"

namespace spectgnn {

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(spectgnn::numel(shape), value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (spectgnn::numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                         std::to_string(spectgnn::numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return spectgnn::numel(shape()); }

std::span<const double> Tensor::data() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->data;
}

std::span<double> Tensor::data_mut() {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->data;
}

std::span<const double> Tensor::grad() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->grad;
}

std::span<double> Tensor::grad_mut() {
  if (!node_) throw ContractError("use of undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

void Tensor::zero_grad() {
  if (!node_) return;
  if (node_->requires_grad) {
    node_->grad.assign(node_->data.size(), 0.0);
  } else {
    node_->grad.clear();
  }
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw ContractError("use of undefined tensor");
  if (!node_->is_leaf) throw ContractError("requires_grad can only be set on leaves");
  node_->requires_grad = flag;
}

bool Tensor::is_leaf() const { return node_ && node_->is_leaf; }

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) {
    throw DimensionError("index rank " + std::to_string(index.size()) + " for shape " +
                         shape_str(s));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw DimensionError("index out of range for shape " + shape_str(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

Tensor Tensor::detach() const { return from_data(shape(), node_->data, false); }

Tensor Tensor::clone() const { return from_data(shape(), node_->data, requires_grad()); }

void Tensor::backward() const { spectgnn::backward(*this); }

Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  node->is_leaf = false;
  if (spectgnn::numel(node->shape) != node->data.size()) {
    throw DimensionError(std::string(op) + ": result shape " + shape_str(node->shape) +
                         " does not match value count");
  }
  if (g_grad_enabled) {
    bool any = false;
    node->inputs.reserve(inputs.size());
    for (const Tensor& in : inputs) {
      if (!in.defined()) continue;
      any = any || in.requires_grad();
      node->inputs.push_back(in.node());
    }
    node->requires_grad = any;
    if (any) node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tape Tape::record(const Tensor& output) {
  Tape tape;
  if (!output.defined()) return tape;
  // Iterative post-order DFS; recursion depth would otherwise track graph depth.
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(output.node(), 0);
  visited.insert(output.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& child = node->inputs[next++];
      if (visited.insert(child.get()).second) stack.emplace_back(child, 0);
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

std::map<std::string, std::size_t> Tape::op_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& node : nodes_) {
    if (!node->is_leaf) ++counts[node->op];
  }
  return counts;
}

void Tape::backward() {
  if (nodes_.empty()) return;
  auto& root = nodes_.back();
  if (root->data.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(root->shape));
  }
  for (auto& node : nodes_) {
    if (!node->is_leaf && node->requires_grad) node->grad.assign(node->data.size(), 0.0);
  }
  if (!root->requires_grad) return;
  root->ensure_grad();
  if (root->is_leaf) {
    root->grad[0] += 1.0;
    return;
  }
  root->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& node = **it;
    if (node.is_leaf || !node.requires_grad || !node.backward) continue;
    node.backward(node.data, node.grad);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward on undefined tensor");
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  Tape tape = Tape::record(loss);
  tape.backward();
}

}  // namespace spectgnn
