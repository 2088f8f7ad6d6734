#pragma once

#include <cstddef>
#include <string>

#include "stan/numerics/parameters.hpp"
#include "stan/numerics/tensor.hpp"

namespace stan::model {

struct Linear {
  num::Tensor w;  // [in, out]
  num::Tensor b;  // [out]

  static Linear create(std::size_t in, std::size_t out, num::ParameterSet& params, const std::string& name,
                       const std::string& group, num::Rng& rng);
  num::Tensor operator()(const num::Tensor& x) const;
};

struct LayerNormParams {
  num::Tensor gamma;
  num::Tensor beta;

  static LayerNormParams create(std::size_t dim, num::ParameterSet& params, const std::string& name,
                                const std::string& group);
  num::Tensor operator()(const num::Tensor& x, double eps) const;
};

// softmax(Q K^T / sqrt(d_k))
num::Tensor attention_weights(const num::Tensor& q, const num::Tensor& k);
// softmax(Q K^T / sqrt(d_k)) V
num::Tensor attention(const num::Tensor& q, const num::Tensor& k, const num::Tensor& v);

struct EncoderBlock {
  Linear query, key, value, output;
  LayerNormParams norm1;
  Linear ffn_in, ffn_out;
  LayerNormParams norm2;

  static EncoderBlock create(std::size_t d_model, std::size_t ffn_hidden, num::ParameterSet& params,
                             const std::string& prefix, const std::string& group, num::Rng& rng);
};

// Heads attend over column slices of width d_model / n_heads; their outputs
// are concatenated and passed through the output projection.
num::Tensor multi_head_self_attention(const num::Tensor& x, const EncoderBlock& block, std::size_t n_heads);

// Post-norm transformer encoder layer:
//   y   = LN(x + MHSA(x))
//   out = LN(y + W2 GELU(W1 y + b1) + b2)
num::Tensor encoder_block(const num::Tensor& x, const EncoderBlock& block, std::size_t n_heads, double eps);

}  // namespace stan::model
