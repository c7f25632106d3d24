#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spectgnn/tensor.hpp"

namespace spectgnn {

struct NamedParam {
  std::string name;
  Tensor value;
};

/// Ordered, named collection of learnable leaves. Order is creation order
/// and defines the checkpoint layout.
class ParamStore {
 public:
  /// Registers a leaf; names must be unique.
  Tensor add(std::string name, Tensor value);

  const std::vector<NamedParam>& all() const noexcept { return params_; }
  std::vector<Tensor> tensors() const;
  const Tensor* find(const std::string& name) const;
  std::size_t scalar_count() const;

  void zero_grads();

 private:
  std::vector<NamedParam> params_;
};

/// Seeded parameter initializer. Draw order is the call order, so the same
/// construction sequence reproduces identical parameters.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  /// uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  Tensor uniform_fan(Shape shape, std::size_t fan_in, std::size_t fan_out);
  Tensor uniform(Shape shape, double bound);
  Tensor constant(Shape shape, double value);

 private:
  std::mt19937_64 rng_;
};

}  // namespace spectgnn
