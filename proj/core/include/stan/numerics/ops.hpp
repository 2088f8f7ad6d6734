#pragma once

#include <cstddef>
#include <span>

#include "stan/numerics/tensor.hpp"

// Differentiable tensor operations. Each one records a backward rule on the
// active tape when any input requires a gradient; otherwise it is a plain
// forward computation. All reductions run in a fixed left-to-right order.
namespace stan::num {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor one_minus(const Tensor& x);

// x[n x d] + b[d] on every row.
Tensor add_row(const Tensor& x, const Tensor& bias);
// x[n x d] * s[d] elementwise on every row.
Tensor mul_row(const Tensor& x, const Tensor& s);

// c[i][j] = sum_p a[i][p] * b[p][j]
Tensor matmul(const Tensor& a, const Tensor& b);
// a[m x k] * b[n x k]^T
Tensor matmul_transposed(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x[n x d_in] * w[d_in x d_out] + b[d_out]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& m);

// Normalizes over the last axis, then applies gamma/beta (each of that length).
// Variance is the biased (1/d) estimate; eps is added inside the square root.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// Exact GELU, x * Phi(x) with Phi(x) = (1 + erf(x / sqrt 2)) / 2.
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

// Full reductions to a rank-0 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Mean over one axis; the axis is removed from the shape.
Tensor mean_axis(const Tensor& x, std::size_t axis);

Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// Mean binary cross entropy of logits against {0,1} targets, computed as
// max(l, 0) - l*y + log(1 + exp(-|l|)). Targets receive no gradient.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

// sum_c KL(sigmoid(teacher_c / T) || sigmoid(student_c / T)) over binary
// distributions. The teacher is treated as a constant.
Tensor binary_kl_with_temperature(const Tensor& student_logits, const Tensor& teacher_logits,
                                  double temperature);

// x[N, C, H, W] (*) w[Co, C, K, K] + b[Co], stride 1, zero "same" padding, K odd.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);

// Convolution along axis 1 of x[N, T, C, ...]: w[Co, C, Kt], b[Co], zero
// "same" padding in time, Kt odd. Trailing axes are carried through.
Tensor conv_time(const Tensor& x, const Tensor& w, const Tensor& b);

// 2x2 average pooling with stride 2 over the last two axes of x[M, C, H, W].
Tensor avg_pool2d(const Tensor& x);

// Averages consecutive pairs along axis 1 of x[N, T, ...].
Tensor avg_pool_time(const Tensor& x);

// x[M, C, H, W]: each (m, c) plane is normalized over its H*W values, then
// scaled by gamma[c] and shifted by beta[c].
Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

}  // namespace stan::num
