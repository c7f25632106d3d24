#include "spectgnn/params.hpp"

#include <cmath>

#include "spectgnn/errors.hpp"

namespace spectgnn {

Tensor ParamStore::add(std::string name, Tensor value) {
  if (find(name) != nullptr) throw ContractError("duplicate parameter name '" + name + "'");
  if (!value.is_leaf()) throw ContractError("parameter '" + name + "' must be a leaf");
  value.set_requires_grad(true);
  params_.push_back({std::move(name), value});
  return value;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.value;
  }
  return nullptr;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p.value.zero_grad();
}

Tensor Initializer::uniform_fan(Shape shape, std::size_t fan_in, std::size_t fan_out) {
  if (fan_in + fan_out == 0) throw ConfigError("uniform_fan: zero fan");
  return uniform(std::move(shape), std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

Tensor Initializer::uniform(Shape shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(numel(shape));
  for (double& v : values) v = dist(rng_);
  return Tensor::from_data(std::move(shape), std::move(values), true);
}

Tensor Initializer::constant(Shape shape, double value) {
  return Tensor::full(std::move(shape), value, true);
}

}  // namespace spectgnn
