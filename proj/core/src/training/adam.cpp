#include "stan/training/adam.hpp"

#include <cmath>

#include "stan/errors.hpp"

namespace stan::train {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ContractError("betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ContractError("eps must be > 0");
  if (!(grad_clip >= 0.0)) throw ContractError("grad_clip must be >= 0");
}

OptimizerState OptimizerState::zeros_like(const num::ParameterSet& params) {
  OptimizerState s;
  for (const auto& p : params.all()) {
    s.m.emplace_back(p.value.size(), 0.0);
    s.v.emplace_back(p.value.size(), 0.0);
  }
  return s;
}

double global_grad_norm(const std::vector<std::vector<double>>& grads, const std::vector<bool>& frozen) {
  double ss = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (frozen[i]) continue;
    for (double g : grads[i]) ss += g * g;
  }
  return std::sqrt(ss);
}

void adam_step(num::ParameterSet& params, const std::vector<std::vector<double>>& grads, OptimizerState& state,
               const AdamConfig& cfg, const std::vector<bool>& frozen) {
  const std::size_t n = params.size();
  if (grads.size() != n || frozen.size() != n) throw DimensionError("adam_step: gradient/frozen lists do not match parameters");
  if (state.m.empty() && state.v.empty()) state = OptimizerState::zeros_like(params);
  if (state.m.size() != n || state.v.size() != n) throw DimensionError("adam_step: optimizer state does not match parameters");

  double clip_scale = 1.0;
  if (cfg.grad_clip > 0.0) {
    const double norm = global_grad_norm(grads, frozen);
    if (norm > cfg.grad_clip) clip_scale = cfg.grad_clip / norm;
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    if (frozen[i]) continue;
    num::Tensor value = params[i].value;
    auto theta = value.mutable_values();
    const auto& g = grads[i];
    if (g.size() != theta.size() || state.m[i].size() != theta.size()) {
      throw DimensionError("adam_step: buffer size mismatch for " + params[i].name);
    }
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = g[k] * clip_scale;
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      theta[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace stan::train
