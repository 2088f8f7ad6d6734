#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "stan/model/config.hpp"
#include "stan/model/layers.hpp"
#include "stan/model/positional.hpp"
#include "stan/numerics/parameters.hpp"
#include "stan/numerics/tensor.hpp"

namespace stan::model {

// [CLS; token_1..token_n] + positional rows, one matrix per active stream.
struct TokenSequences {
  std::optional<num::Tensor> spatial;
  std::optional<num::Tensor> temporal;
};

// Per-stream encoder outputs, (n + 1) x d_model each.
struct StreamOutputs {
  std::optional<num::Tensor> spatial;
  std::optional<num::Tensor> temporal;
};

struct ForwardOutput {
  num::Tensor logits;  // [1, n_classes]
  std::optional<num::Tensor> spatial_cls;
  std::optional<num::Tensor> temporal_cls;
  std::optional<num::Tensor> q_spatial;
  std::optional<num::Tensor> q_temporal;
  num::Tensor fused_pre_norm;
  std::optional<num::Tensor> teacher_logits;  // distill fusion only
};

// Two-stream scene transformer with CLS fusion. Features of each stream are
// standardized per dimension, projected to d_model, prefixed with a learned
// CLS vector and offset by one positional table shared by both streams. Each stream runs its own encoder
// stack; only the CLS rows reach the fusion head:
//   fused  = LN(q(cls_s) + lambda * q(cls_t))
//   logits = h(fused)
// with q a one-hidden-layer MLP applied to both streams with the same weights.
class StanModel {
 public:
  StanModel(const ModelConfig& cfg, num::ParameterSet& params, num::Rng& rng);

  const ModelConfig& config() const { return cfg_; }
  const PositionalTable& positional_table() const { return *table_; }
  std::shared_ptr<const PositionalTable> shared_positional_table() const { return table_; }
  void set_positional_table(std::shared_ptr<const PositionalTable> table);

  // spatial: [n, spatial_dim], temporal: [n, temporal_dim]; each must be
  // present exactly when its stream is active. Throws SequenceLengthError for
  // n > max_scenes.
  TokenSequences build_sequences(const std::optional<num::Tensor>& spatial,
                                 const std::optional<num::Tensor>& temporal) const;

  StreamOutputs encode_streams(const TokenSequences& seqs) const;
  // Fusion and classification from row 0 of each stream output.
  ForwardOutput head(const StreamOutputs& outputs) const;
  ForwardOutput head_from_cls(const std::optional<num::Tensor>& spatial_cls,
                              const std::optional<num::Tensor>& temporal_cls) const;
  ForwardOutput forward(const TokenSequences& seqs) const;

  // Training objective for the configured fusion variant.
  num::Tensor loss(const ForwardOutput& out, const num::Tensor& targets) const;

  // The shared q(.) MLP.
  num::Tensor project_cls(const num::Tensor& cls) const;

  // Stores (x - mean) / stddev for one stream; stddev must be positive.
  void set_input_statistics(bool spatial, std::span<const double> mean, std::span<const double> stddev);

  const std::vector<EncoderBlock>& spatial_blocks() const { return spatial_blocks_; }
  const std::vector<EncoderBlock>& temporal_blocks() const { return temporal_blocks_; }

 private:
  struct InputStats {
    num::Tensor shift, scale;
  };
  num::Tensor build_stream(const num::Tensor& feats, const num::Tensor& cls, const Linear& proj,
                           const InputStats& stats) const;
  num::Tensor run_stream(const num::Tensor& tokens, const std::vector<EncoderBlock>& blocks) const;
  num::Tensor classify(const num::Tensor& x, const std::vector<Linear>& layers) const;

  ModelConfig cfg_;
  std::shared_ptr<const PositionalTable> table_;
  num::Tensor cls_spatial_, cls_temporal_;
  Linear proj_spatial_, proj_temporal_;
  InputStats stats_spatial_, stats_temporal_;
  std::vector<EncoderBlock> spatial_blocks_, temporal_blocks_;
  Linear q_in_, q_out_;
  LayerNormParams fusion_norm_;
  Linear gate_;
  std::vector<Linear> classifier_;
  LayerNormParams teacher_norm_;
  std::vector<Linear> teacher_classifier_;
};

}  // namespace stan::model
