#include "stan/model/layers.hpp"

#include <cmath>
#include <vector>

#include "stan/errors.hpp"
#include "stan/numerics/ops.hpp"

namespace stan::model {

using num::Tensor;

Linear Linear::create(std::size_t in, std::size_t out, num::ParameterSet& params, const std::string& name,
                      const std::string& group, num::Rng& rng) {
  Linear l;
  l.w = params.add(name + ".w", group, num::uniform_fan_in({in, out}, in, rng));
  l.b = params.add(name + ".b", group, Tensor::zeros({out}));
  return l;
}

Tensor Linear::operator()(const Tensor& x) const { return num::affine(x, w, b); }

LayerNormParams LayerNormParams::create(std::size_t dim, num::ParameterSet& params, const std::string& name,
                                        const std::string& group) {
  LayerNormParams ln;
  ln.gamma = params.add(name + ".gamma", group, Tensor::full({dim}, 1.0));
  ln.beta = params.add(name + ".beta", group, Tensor::zeros({dim}));
  return ln;
}

Tensor LayerNormParams::operator()(const Tensor& x, double eps) const { return num::layer_norm(x, gamma, beta, eps); }

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  if (q.rank() != 2 || k.rank() != 2 || q.dim(1) != k.dim(1)) {
    throw DimensionError("attention: Q " + num::shape_string(q.shape()) + " and K " + num::shape_string(k.shape()) +
                         " must share d_k");
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  return num::softmax_rows(num::scale(num::matmul_transposed(q, k), inv_sqrt_dk));
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (v.rank() != 2 || v.dim(0) != k.dim(0)) {
    throw DimensionError("attention: V " + num::shape_string(v.shape()) + " must have one row per key");
  }
  return num::matmul(attention_weights(q, k), v);
}

EncoderBlock EncoderBlock::create(std::size_t d_model, std::size_t ffn_hidden, num::ParameterSet& params,
                                  const std::string& prefix, const std::string& group, num::Rng& rng) {
  EncoderBlock b;
  b.query = Linear::create(d_model, d_model, params, prefix + ".attn.query", group, rng);
  b.key = Linear::create(d_model, d_model, params, prefix + ".attn.key", group, rng);
  b.value = Linear::create(d_model, d_model, params, prefix + ".attn.value", group, rng);
  b.output = Linear::create(d_model, d_model, params, prefix + ".attn.output", group, rng);
  b.norm1 = LayerNormParams::create(d_model, params, prefix + ".norm1", group);
  b.ffn_in = Linear::create(d_model, ffn_hidden, params, prefix + ".ffn.in", group, rng);
  b.ffn_out = Linear::create(ffn_hidden, d_model, params, prefix + ".ffn.out", group, rng);
  b.norm2 = LayerNormParams::create(d_model, params, prefix + ".norm2", group);
  return b;
}

Tensor multi_head_self_attention(const Tensor& x, const EncoderBlock& block, std::size_t n_heads) {
  const std::size_t d_model = x.dim(1);
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ContractError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(n_heads) +
                        " heads");
  }
  const std::size_t d_head = d_model / n_heads;
  const Tensor q = block.query(x), k = block.key(x), v = block.value(x);
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    heads.push_back(attention(num::slice_cols(q, h * d_head, d_head), num::slice_cols(k, h * d_head, d_head),
                              num::slice_cols(v, h * d_head, d_head)));
  }
  const Tensor merged = n_heads == 1 ? heads.front() : num::concat_cols(heads);
  return block.output(merged);
}

Tensor encoder_block(const Tensor& x, const EncoderBlock& block, std::size_t n_heads, double eps) {
  const Tensor y = block.norm1(num::add(x, multi_head_self_attention(x, block, n_heads)), eps);
  const Tensor ffn = block.ffn_out(num::gelu(block.ffn_in(y)));
  return block.norm2(num::add(y, ffn), eps);
}

}  // namespace stan::model
