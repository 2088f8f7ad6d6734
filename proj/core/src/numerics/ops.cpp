#include "stan/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "stan/errors.hpp"
#include "stan/numerics/tape.hpp"

namespace stan::num {

namespace {

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void record(Tensor& out, Tape::BackwardFn fn) { active_tape()->record(out, std::move(fn)); }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

// Applies f elementwise; df(x, y) returns dy/dx given input x and output y.
template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  Tensor result(x.shape(), std::move(out));
  if (recording({&x})) {
    record(result, [x, result, df](std::span<const double> g, Tape& tape) {
      auto gx = tape.grad_buffer(x);
      auto xv = x.values();
      auto yv = result.values();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
    });
  }
  return result;
}

// c[m x n] += a[m x k] * b[k x n], accumulating over k in increasing order.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Tensor result(a.shape(), std::move(out));
  if (recording({&a, &b})) {
    record(result, [a, b](std::span<const double> g, Tape& tape) {
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto gt = tape.grad_buffer(*t);
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Tensor result(a.shape(), std::move(out));
  if (recording({&a, &b})) {
    record(result, [a, b](std::span<const double> g, Tape& tape) {
      if (a.requires_grad()) {
        auto ga = tape.grad_buffer(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = tape.grad_buffer(b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tensor result(a.shape(), std::move(out));
  if (recording({&a, &b})) {
    record(result, [a, b](std::span<const double> g, Tape& tape) {
      if (a.requires_grad()) {
        auto ga = tape.grad_buffer(a);
        auto bv = b.values();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = tape.grad_buffer(b);
        auto av = a.values();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor one_minus(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  require_rank("add_row", x, 2);
  require_rank("add_row", bias, 1);
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (bias.dim(0) != d) {
    throw DimensionError("add_row: bias " + shape_string(bias.shape()) + " vs rows of " + shape_string(x.shape()));
  }
  auto xv = x.values();
  auto bv = bias.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xv[i * d + j] + bv[j];
  Tensor result(x.shape(), std::move(out));
  if (recording({&x, &bias})) {
    record(result, [x, bias, n, d](std::span<const double> g, Tape& tape) {
      if (x.requires_grad()) {
        auto gx = tape.grad_buffer(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto gb = tape.grad_buffer(bias);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
      }
    });
  }
  return result;
}

Tensor mul_row(const Tensor& x, const Tensor& s) {
  require_rank("mul_row", x, 2);
  require_rank("mul_row", s, 1);
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (s.dim(0) != d) {
    throw DimensionError("mul_row: scale " + shape_string(s.shape()) + " vs rows of " + shape_string(x.shape()));
  }
  auto xv = x.values();
  auto sv = s.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xv[i * d + j] * sv[j];
  Tensor result(x.shape(), std::move(out));
  if (recording({&x, &s})) {
    record(result, [x, s, n, d](std::span<const double> g, Tape& tape) {
      if (x.requires_grad()) {
        auto gx = tape.grad_buffer(x);
        auto sv = s.values();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j] * sv[j];
      }
      if (s.requires_grad()) {
        auto gs = tape.grad_buffer(s);
        auto xv = x.values();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gs[j] += g[i * d + j] * xv[i * d + j];
      }
    });
  }
  return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  Tensor result({m, n}, std::move(out));
  if (recording({&a, &b})) {
    record(result, [a, b, m, k, n](std::span<const double> g, Tape& tape) {
      if (a.requires_grad()) gemm_nt(g.data(), b.values().data(), tape.grad_buffer(a).data(), m, n, k);
      if (b.requires_grad()) gemm_tn(a.values().data(), g.data(), tape.grad_buffer(b).data(), m, k, n);
    });
  }
  return result;
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  require_rank("matmul_transposed", a, 2);
  require_rank("matmul_transposed", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_transposed: inner dimensions disagree, " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
  Tensor result({m, n}, std::move(out));
  if (recording({&a, &b})) {
    record(result, [a, b, m, k, n](std::span<const double> g, Tape& tape) {
      // dA = G * B, dB = G^T * A
      if (a.requires_grad()) gemm_nn(g.data(), b.values().data(), tape.grad_buffer(a).data(), m, n, k);
      if (b.requires_grad()) gemm_tn(g.data(), a.values().data(), tape.grad_buffer(b).data(), m, n, k);
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  Tensor result({n, m}, std::move(out));
  if (recording({&a})) {
    record(result, [a, m, n](std::span<const double> g, Tape& tape) {
      auto ga = tape.grad_buffer(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  }
  return result;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank("affine", w, 2);
  require_rank("affine", b, 1);
  if (b.dim(0) != w.dim(1)) {
    throw DimensionError("affine: bias " + shape_string(b.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  return add_row(matmul(x, w), b);
}

Tensor softmax_rows(const Tensor& m) {
  require_rank("softmax_rows", m, 2);
  const std::size_t r = m.dim(0), c = m.dim(1);
  auto in = m.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = in.data() + i * c;
    double* orow = out.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      total += orow[j];
    }
    for (std::size_t j = 0; j < c; ++j) orow[j] /= total;
  }
  Tensor result(m.shape(), std::move(out));
  if (recording({&m})) {
    record(result, [m, result, r, c](std::span<const double> g, Tape& tape) {
      auto gm = tape.grad_buffer(m);
      auto y = result.values();
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
        for (std::size_t j = 0; j < c; ++j) gm[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
      }
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  if (!(eps > 0)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gamma/beta " + shape_string(gamma.shape()) + "/" + shape_string(beta.shape()) +
                         " vs last axis of " + shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / d;
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> out(xv.size());
  std::vector<double> normalized(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = xv.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mu) * inv_std[i];
      normalized[i * d + j] = xh;
      out[i * d + j] = xh * gv[j] + bv[j];
    }
  }
  Tensor result(x.shape(), std::move(out));
  if (recording({&x, &gamma, &beta})) {
    record(result, [x, gamma, beta, d, rows, normalized = std::move(normalized),
                    inv_std = std::move(inv_std)](std::span<const double> g, Tape& tape) {
      if (gamma.requires_grad()) {
        auto gg = tape.grad_buffer(gamma);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * normalized[i * d + j];
      }
      if (beta.requires_grad()) {
        auto gb = tape.grad_buffer(beta);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
      }
      if (x.requires_grad()) {
        auto gx = tape.grad_buffer(x);
        auto gv = gamma.values();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < rows; ++i) {
          double mean_g = 0.0, mean_gx = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[i * d + j] * gv[j];
            mean_g += gh;
            mean_gx += gh * normalized[i * d + j];
          }
          mean_g *= inv_d;
          mean_gx *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[i * d + j] * gv[j];
            gx[i * d + j] += inv_std[i] * (gh - mean_g - normalized[i * d + j] * mean_gx);
          }
        }
      }
    });
  }
  return result;
}

Tensor gelu(const Tensor& x) {
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor result = Tensor::scalar(total);
  if (recording({&x})) {
    record(result, [x](std::span<const double> g, Tape& tape) {
      auto gx = tape.grad_buffer(x);
      for (double& v : gx) v += g[0];
    });
  }
  return result;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw DimensionError("mean_axis: axis out of range for " + shape_string(x.shape()));
  const auto& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out_shape.push_back(shape[i]);
  auto xv = x.values();
  std::vector<double> out(outer * inner, 0.0);
  const double inv = 1.0 / static_cast<double>(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t a = 0; a < len; ++a) {
      const double* src = xv.data() + (o * len + a) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] *= inv;
  }
  Tensor result(std::move(out_shape), std::move(out));
  if (recording({&x})) {
    record(result, [x, outer, inner, len, inv](std::span<const double> g, Tape& tape) {
      auto gx = tape.grad_buffer(x);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = 0; a < len; ++a)
          for (std::size_t i = 0; i < inner; ++i) gx[(o * len + a) * inner + i] += g[o * inner + i] * inv;
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (element_count(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  Tensor result(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()));
  if (recording({&x})) {
    record(result, [x](std::span<const double> g, Tape& tape) {
      auto gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    });
  }
  return result;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank("slice_rows", x, 2);
  const std::size_t d = x.dim(1);
  if (count == 0 || begin + count > x.dim(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + shape_string(x.shape()));
  }
  auto xv = x.values();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * d),
                          xv.begin() + static_cast<std::ptrdiff_t>((begin + count) * d));
  Tensor result({count, d}, std::move(out));
  if (recording({&x})) {
    record(result, [x, begin, d](std::span<const double> g, Tape& tape) {
      auto gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[begin * d + i] += g[i];
    });
  }
  return result;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank("slice_cols", x, 2);
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (count == 0 || begin + count > d) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + shape_string(x.shape()));
  }
  auto xv = x.values();
  std::vector<double> out(n * count);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = xv[i * d + begin + j];
  Tensor result({n, count}, std::move(out));
  if (recording({&x})) {
    record(result, [x, begin, count, n, d](std::span<const double> g, Tape& tape) {
      auto gx = tape.grad_buffer(x);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < count; ++j) gx[i * d + begin + j] += g[i * count + j];
    });
  }
  return result;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t d = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(1) != d) {
      throw DimensionError("concat_rows: incompatible part " + shape_string(p.shape()));
    }
    rows += p.dim(0);
    any_grad = any_grad || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(rows * d);
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  Tensor result({rows, d}, std::move(out));
  if (active_tape() != nullptr && any_grad) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    record(result, [inputs = std::move(inputs)](std::span<const double> g, Tape& tape) {
      std::size_t offset = 0;
      for (const Tensor& p : inputs) {
        if (p.requires_grad()) {
          auto gp = tape.grad_buffer(p);
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
        }
        offset += p.size();
      }
    });
  }
  return result;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t cols = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != n) {
      throw DimensionError("concat_cols: incompatible part " + shape_string(p.shape()));
    }
    cols += p.dim(1);
    any_grad = any_grad || p.requires_grad();
  }
  std::vector<double> out(n * cols);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.dim(1);
    auto pv = p.values();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * cols + offset + j] = pv[i * w + j];
    offset += w;
  }
  Tensor result({n, cols}, std::move(out));
  if (active_tape() != nullptr && any_grad) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    record(result, [inputs = std::move(inputs), n, cols](std::span<const double> g, Tape& tape) {
      std::size_t off = 0;
      for (const Tensor& p : inputs) {
        const std::size_t w = p.dim(1);
        if (p.requires_grad()) {
          auto gp = tape.grad_buffer(p);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * cols + off + j];
        }
        off += w;
      }
    });
  }
  return result;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  require_same_shape("bce_with_logits", logits, targets);
  auto lv = logits.values();
  auto yv = targets.values();
  double total = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    total += std::max(lv[i], 0.0) - lv[i] * yv[i] + std::log1p(std::exp(-std::abs(lv[i])));
  }
  const double inv = 1.0 / static_cast<double>(lv.size());
  Tensor result = Tensor::scalar(total * inv);
  if (recording({&logits})) {
    record(result, [logits, targets, inv](std::span<const double> g, Tape& tape) {
      auto gl = tape.grad_buffer(logits);
      auto lv = logits.values();
      auto yv = targets.values();
      for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += g[0] * inv * (sigmoid_scalar(lv[i]) - yv[i]);
    });
  }
  return result;
}

Tensor binary_kl_with_temperature(const Tensor& student_logits, const Tensor& teacher_logits,
                                  double temperature) {
  require_same_shape("binary_kl_with_temperature", student_logits, teacher_logits);
  if (!(temperature > 0)) throw ContractError("binary_kl_with_temperature: temperature must be positive");
  auto sv = student_logits.values();
  auto tv = teacher_logits.values();
  double total = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const double s = sv[i] / temperature;
    const double t = tv[i] / temperature;
    const double p = sigmoid_scalar(t);
    // log p = -softplus(-t), log(1-p) = -softplus(t)
    const double log_p = -softplus(-t), log_1mp = -softplus(t);
    const double log_q = -softplus(-s), log_1mq = -softplus(s);
    total += p * (log_p - log_q) + (1.0 - p) * (log_1mp - log_1mq);
  }
  Tensor result = Tensor::scalar(total);
  if (recording({&student_logits})) {
    record(result, [student_logits, teacher_logits, temperature](std::span<const double> g, Tape& tape) {
      auto gs = tape.grad_buffer(student_logits);
      auto sv = student_logits.values();
      auto tv = teacher_logits.values();
      for (std::size_t i = 0; i < gs.size(); ++i) {
        const double q = sigmoid_scalar(sv[i] / temperature);
        const double p = sigmoid_scalar(tv[i] / temperature);
        gs[i] += g[0] * (q - p) / temperature;
      }
    });
  }
  return result;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", w, 4);
  require_rank("conv2d", b, 1);
  const std::size_t batch = x.dim(0), cin = x.dim(1), height = x.dim(2), width = x.dim(3);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin || w.dim(3) != k || k % 2 == 0 || b.dim(0) != cout) {
    throw DimensionError("conv2d: input " + shape_string(x.shape()) + ", weight " + shape_string(w.shape()) +
                         ", bias " + shape_string(b.shape()));
  }
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto H = static_cast<std::ptrdiff_t>(height), W = static_cast<std::ptrdiff_t>(width);
  const std::size_t plane = height * width;
  auto xv = x.values();
  auto wv = w.values();
  auto bv = b.values();
  std::vector<double> out(batch * cout * plane);

  // Visits every (output pixel, input pixel, weight) triple of the valid
  // region in a fixed order; fn(out_offset, in_offset, weight_index, run).
  auto for_each_tap = [=](std::size_t n, std::size_t co, std::size_t ci, auto&& fn) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
      const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy), y1 = std::min(H, H - dy);
      for (std::size_t kx = 0; kx < k; ++kx) {
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx), x1 = std::min(W, W - dx);
        if (x1 <= x0) continue;
        const std::size_t widx = ((co * cin + ci) * k + ky) * k + kx;
        for (std::ptrdiff_t y = y0; y < y1; ++y) {
          const std::size_t o = (n * cout + co) * plane + static_cast<std::size_t>(y * W + x0);
          const std::size_t i = (n * cin + ci) * plane + static_cast<std::size_t>((y + dy) * W + x0 + dx);
          fn(o, i, widx, static_cast<std::size_t>(x1 - x0));
        }
      }
    }
  };

  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t co = 0; co < cout; ++co) {
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((n * cout + co) * plane), plane, bv[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        for_each_tap(n, co, ci, [&](std::size_t o, std::size_t i, std::size_t widx, std::size_t run) {
          const double wt = wv[widx];
          double* dst = out.data() + o;
          const double* src = xv.data() + i;
          for (std::size_t j = 0; j < run; ++j) dst[j] += wt * src[j];
        });
      }
    }
  }
  Tensor result({batch, cout, height, width}, std::move(out));
  if (recording({&x, &w, &b})) {
    record(result, [x, w, b, batch, cin, cout, plane, for_each_tap](std::span<const double> g, Tape& tape) {
      std::span<double> gx, gw;
      if (x.requires_grad()) gx = tape.grad_buffer(x);
      if (w.requires_grad()) gw = tape.grad_buffer(w);
      auto xv = x.values();
      auto wv = w.values();
      if (b.requires_grad()) {
        auto gb = tape.grad_buffer(b);
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gp = g.data() + (n * cout + co) * plane;
            double acc = 0.0;
            for (std::size_t p = 0; p < plane; ++p) acc += gp[p];
            gb[co] += acc;
          }
      }
      if (gx.empty() && gw.empty()) return;
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t ci = 0; ci < cin; ++ci)
            for_each_tap(n, co, ci, [&](std::size_t o, std::size_t i, std::size_t widx, std::size_t run) {
              const double* gp = g.data() + o;
              if (!gx.empty()) {
                const double wt = wv[widx];
                double* dst = gx.data() + i;
                for (std::size_t j = 0; j < run; ++j) dst[j] += wt * gp[j];
              }
              if (!gw.empty()) {
                const double* src = xv.data() + i;
                double acc = 0.0;
                for (std::size_t j = 0; j < run; ++j) acc += gp[j] * src[j];
                gw[widx] += acc;
              }
            });
    });
  }
  return result;
}

Tensor conv_time(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() < 3) throw DimensionError("conv_time: need x[N, T, C, ...], got " + shape_string(x.shape()));
  require_rank("conv_time", w, 3);
  require_rank("conv_time", b, 1);
  const std::size_t batch = x.dim(0), frames = x.dim(1), cin = x.dim(2);
  const std::size_t cout = w.dim(0), kt = w.dim(2);
  if (w.dim(1) != cin || kt % 2 == 0 || b.dim(0) != cout) {
    throw DimensionError("conv_time: input " + shape_string(x.shape()) + ", weight " + shape_string(w.shape()) +
                         ", bias " + shape_string(b.shape()));
  }
  const std::size_t points = x.size() / (batch * frames * cin);
  const auto pad = static_cast<std::ptrdiff_t>(kt / 2);
  const auto T = static_cast<std::ptrdiff_t>(frames);
  Shape out_shape = x.shape();
  out_shape[2] = cout;
  auto xv = x.values();
  auto wv = w.values();
  auto bv = b.values();
  std::vector<double> out(batch * frames * cout * points);

  auto in_offset = [=](std::size_t n, std::size_t t, std::size_t c) { return ((n * frames + t) * cin + c) * points; };
  auto out_offset = [=](std::size_t n, std::size_t t, std::size_t c) {
    return ((n * frames + t) * cout + c) * points;
  };

  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t co = 0; co < cout; ++co) {
        double* dst = out.data() + out_offset(n, t, co);
        std::fill_n(dst, points, bv[co]);
        for (std::size_t tau = 0; tau < kt; ++tau) {
          const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(tau) - pad;
          if (src_t < 0 || src_t >= T) continue;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double wt = wv[(co * cin + ci) * kt + tau];
            const double* src = xv.data() + in_offset(n, static_cast<std::size_t>(src_t), ci);
            for (std::size_t p = 0; p < points; ++p) dst[p] += wt * src[p];
          }
        }
      }
  Tensor result(std::move(out_shape), std::move(out));
  if (recording({&x, &w, &b})) {
    record(result, [x, w, b, batch, frames, cin, cout, kt, points, pad, T, in_offset,
                    out_offset](std::span<const double> g, Tape& tape) {
      std::span<double> gx, gw, gb;
      if (x.requires_grad()) gx = tape.grad_buffer(x);
      if (w.requires_grad()) gw = tape.grad_buffer(w);
      if (b.requires_grad()) gb = tape.grad_buffer(b);
      auto xv = x.values();
      auto wv = w.values();
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t t = 0; t < frames; ++t)
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gp = g.data() + out_offset(n, t, co);
            if (!gb.empty()) {
              double acc = 0.0;
              for (std::size_t p = 0; p < points; ++p) acc += gp[p];
              gb[co] += acc;
            }
            for (std::size_t tau = 0; tau < kt; ++tau) {
              const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(tau) - pad;
              if (src_t < 0 || src_t >= T) continue;
              for (std::size_t ci = 0; ci < cin; ++ci) {
                const std::size_t widx = (co * cin + ci) * kt + tau;
                const std::size_t off = in_offset(n, static_cast<std::size_t>(src_t), ci);
                if (!gx.empty()) {
                  const double wt = wv[widx];
                  double* dst = gx.data() + off;
                  for (std::size_t p = 0; p < points; ++p) dst[p] += wt * gp[p];
                }
                if (!gw.empty()) {
                  const double* src = xv.data() + off;
                  double acc = 0.0;
                  for (std::size_t p = 0; p < points; ++p) acc += gp[p] * src[p];
                  gw[widx] += acc;
                }
              }
            }
          }
    });
  }
  return result;
}

Tensor avg_pool2d(const Tensor& x) {
  require_rank("avg_pool2d", x, 4);
  const std::size_t planes = x.dim(0) * x.dim(1), height = x.dim(2), width = x.dim(3);
  const std::size_t oh = height / 2, ow = width / 2;
  if (oh == 0 || ow == 0) throw DimensionError("avg_pool2d: plane too small in " + shape_string(x.shape()));
  auto xv = x.values();
  std::vector<double> out(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.data() + p * height * width;
    double* dst = out.data() + p * oh * ow;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const double* s = src + 2 * y * width + 2 * xx;
        dst[y * ow + xx] = 0.25 * (s[0] + s[1] + s[width] + s[width + 1]);
      }
  }
  Tensor result({x.dim(0), x.dim(1), oh, ow}, std::move(out));
  if (recording({&x})) {
    record(result, [x, planes, height, width, oh, ow](std::span<const double> g, Tape& tape) {
      auto gx = tape.grad_buffer(x);
      for (std::size_t p = 0; p < planes; ++p) {
        double* dst = gx.data() + p * height * width;
        const double* gp = g.data() + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            const double v = 0.25 * gp[y * ow + xx];
            double* d = dst + 2 * y * width + 2 * xx;
            d[0] += v;
            d[1] += v;
            d[width] += v;
            d[width + 1] += v;
          }
      }
    });
  }
  return result;
}

Tensor avg_pool_time(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("avg_pool_time: need x[N, T, ...], got " + shape_string(x.shape()));
  const std::size_t batch = x.dim(0), frames = x.dim(1);
  const std::size_t out_frames = frames / 2;
  if (out_frames == 0) throw DimensionError("avg_pool_time: fewer than two frames in " + shape_string(x.shape()));
  const std::size_t stride = x.size() / (batch * frames);
  Shape out_shape = x.shape();
  out_shape[1] = out_frames;
  auto xv = x.values();
  std::vector<double> out(batch * out_frames * stride);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t t = 0; t < out_frames; ++t) {
      const double* a = xv.data() + (n * frames + 2 * t) * stride;
      const double* c = a + stride;
      double* dst = out.data() + (n * out_frames + t) * stride;
      for (std::size_t i = 0; i < stride; ++i) dst[i] = 0.5 * (a[i] + c[i]);
    }
  Tensor result(std::move(out_shape), std::move(out));
  if (recording({&x})) {
    record(result, [x, batch, frames, out_frames, stride](std::span<const double> g, Tape& tape) {
      auto gx = tape.grad_buffer(x);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t t = 0; t < out_frames; ++t) {
          const double* gp = g.data() + (n * out_frames + t) * stride;
          double* a = gx.data() + (n * frames + 2 * t) * stride;
          double* c = a + stride;
          for (std::size_t i = 0; i < stride; ++i) {
            a[i] += 0.5 * gp[i];
            c[i] += 0.5 * gp[i];
          }
        }
    });
  }
  return result;
}

Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank("channel_norm", x, 4);
  if (!(eps > 0)) throw ContractError("channel_norm: eps must be positive");
  const std::size_t outer = x.dim(0), channels = x.dim(1), inner = x.dim(2) * x.dim(3);
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw DimensionError("channel_norm: gamma/beta " + shape_string(gamma.shape()) + " vs channels of " +
                         shape_string(x.shape()));
  }
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> out(xv.size());
  std::vector<double> normalized(xv.size());
  std::vector<double> inv_std(outer * channels);
  for (std::size_t m = 0; m < outer; ++m)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t plane = m * channels + c;
      const double* src = xv.data() + plane * inner;
      double mu = 0.0;
      for (std::size_t i = 0; i < inner; ++i) mu += src[i];
      mu /= static_cast<double>(inner);
      double var = 0.0;
      for (std::size_t i = 0; i < inner; ++i) var += (src[i] - mu) * (src[i] - mu);
      var /= static_cast<double>(inner);
      inv_std[plane] = 1.0 / std::sqrt(var + eps);
      for (std::size_t i = 0; i < inner; ++i) {
        const double xh = (src[i] - mu) * inv_std[plane];
        normalized[plane * inner + i] = xh;
        out[plane * inner + i] = xh * gv[c] + bv[c];
      }
    }
  Tensor result(x.shape(), std::move(out));
  if (recording({&x, &gamma, &beta})) {
    record(result, [x, gamma, beta, outer, channels, inner, normalized = std::move(normalized),
                    inv_std = std::move(inv_std)](std::span<const double> g, Tape& tape) {
      std::span<double> gx, gg, gb;
      if (x.requires_grad()) gx = tape.grad_buffer(x);
      if (gamma.requires_grad()) gg = tape.grad_buffer(gamma);
      if (beta.requires_grad()) gb = tape.grad_buffer(beta);
      auto gv = gamma.values();
      const double inv_n = 1.0 / static_cast<double>(inner);
      for (std::size_t m = 0; m < outer; ++m)
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t plane = m * channels + c;
          const double* gp = g.data() + plane * inner;
          const double* xh = normalized.data() + plane * inner;
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t i = 0; i < inner; ++i) {
            sum_g += gp[i];
            sum_gx += gp[i] * xh[i];
          }
          if (!gg.empty()) gg[c] += sum_gx;
          if (!gb.empty()) gb[c] += sum_g;
          if (!gx.empty()) {
            const double k = gv[c] * inv_std[plane];
            const double mean_g = sum_g * inv_n, mean_gx = sum_gx * inv_n;
            double* dst = gx.data() + plane * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += k * (gp[i] - mean_g - xh[i] * mean_gx);
          }
        }
    });
  }
  return result;
}

}  // namespace stan::num
