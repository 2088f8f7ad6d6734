#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stan/model/network.hpp"
#include "stan/numerics/parameters.hpp"
#include "stan/numerics/tensor.hpp"

namespace stan::train {

struct GradcheckOptions {
  std::size_t coords_per_group = 100;  // every coordinate when the group is smaller
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error |a - f| / max(|a|, |f|, floor).
  double floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GroupCheck {
  std::string group;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst;  // "name[index]"
};

struct GradcheckReport {
  std::vector<GroupCheck> groups;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Compares reverse-mode gradients of loss_fn against central differences on
// randomly sampled coordinates of each parameter group. loss_fn must rebuild
// the forward pass from the current parameter values.
GradcheckReport check_gradients(num::ParameterSet& params, const std::function<num::Tensor()>& loss_fn,
                                const GradcheckOptions& options, const std::vector<std::string>& skip_groups = {});

// Small two-stream network with both encoders trained end to end, for the
// full-model check.
model::NetworkConfig gradcheck_network_config(std::uint64_t seed);

// Full model check: a random multi-scene clip sample through both encoders,
// both transformer streams, fusion and the loss of `fusion`. Distill fusion
// is not checkable this way: its teacher is a stop-gradient target.
GradcheckReport run_model_gradcheck(std::uint64_t seed, model::Fusion fusion = model::Fusion::sum,
                                    GradcheckOptions options = {});

}  // namespace stan::train
