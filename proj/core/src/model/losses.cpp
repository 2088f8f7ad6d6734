#include "stan/model/losses.hpp"

#include "stan/errors.hpp"
#include "stan/numerics/ops.hpp"

namespace stan::model {

num::Tensor fusion_loss(const num::Tensor& logits, const num::Tensor& targets) {
  return num::bce_with_logits(logits, targets);
}

num::Tensor distillation_loss(const num::Tensor& student_logits, const num::Tensor& teacher_logits,
                              const num::Tensor& targets, double temperature, double alpha) {
  if (!(temperature > 0)) throw ContractError("distillation temperature must be positive");
  if (!(alpha >= 0 && alpha <= 1)) throw ContractError("distillation weight must lie in [0, 1]");
  const num::Tensor hard = num::scale(num::bce_with_logits(student_logits, targets), 1.0 - alpha);
  if (alpha == 0) return hard;
  const num::Tensor soft = num::binary_kl_with_temperature(student_logits, teacher_logits.detach(), temperature);
  return num::add(hard, num::scale(soft, alpha * temperature * temperature));
}

}  // namespace stan::model
