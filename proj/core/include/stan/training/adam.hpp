#pragma once

#include <cstdint>
#include <vector>

#include "stan/numerics/parameters.hpp"

namespace stan::train {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Rescale the gradient of all trainable parameters to this global L2 norm
  // when it is exceeded; 0 disables clipping.
  double grad_clip = 0.0;

  void validate() const;
};

// First and second moments, one buffer per registered parameter.
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static OptimizerState zeros_like(const num::ParameterSet& params);
  bool operator==(const OptimizerState&) const = default;
};

// One bias-corrected Adam update in parameter registration order. `grads`
// holds one buffer per parameter. Parameters with frozen[i] set keep their
// values and their moments stay zero.
void adam_step(num::ParameterSet& params, const std::vector<std::vector<double>>& grads, OptimizerState& state,
               const AdamConfig& cfg, const std::vector<bool>& frozen);

// L2 norm over the non-frozen gradient buffers, accumulated in order.
double global_grad_norm(const std::vector<std::vector<double>>& grads, const std::vector<bool>& frozen);

}  // namespace stan::train
