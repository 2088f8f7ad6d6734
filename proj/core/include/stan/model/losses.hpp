#pragma once

#include "stan/numerics/tensor.hpp"

namespace stan::model {

// Mean binary cross entropy of logits against a multi-hot target.
num::Tensor fusion_loss(const num::Tensor& logits, const num::Tensor& targets);

// (1 - alpha) * BCE(student, y) + alpha * T^2 * sum_c KL(sigmoid(t_c/T) || sigmoid(s_c/T)).
// Teacher logits are constants.
num::Tensor distillation_loss(const num::Tensor& student_logits, const num::Tensor& teacher_logits,
                              const num::Tensor& targets, double temperature, double alpha);

}  // namespace stan::model
