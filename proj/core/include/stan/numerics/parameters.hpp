#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "stan/numerics/tensor.hpp"

namespace stan::num {

using Rng = std::mt19937_64;

// A learnable tensor with a stable name and the group it is optimized,
// frozen and gradient-checked with.
struct Parameter {
  std::string name;
  std::string group;
  Tensor value;
};

// Ordered registry of every learnable tensor of a network. Registration order
// fixes the checkpoint layout and the optimizer's update order.
class ParameterSet {
 public:
  // Registers `value` as a leaf requiring gradients and returns the shared handle.
  Tensor add(std::string name, std::string group, Tensor value);

  const std::vector<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  // Group names in order of first registration.
  std::vector<std::string> groups() const;
  std::size_t scalar_count() const;
  std::size_t scalar_count(std::string_view group) const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<Parameter> params_;
};

// Fan-in scaled uniform initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng);
Tensor normal_init(Shape shape, double stddev, Rng& rng);

}  // namespace stan::num
