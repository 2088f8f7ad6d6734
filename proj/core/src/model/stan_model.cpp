#include "stan/model/stan_model.hpp"

#include <string>

#include "stan/errors.hpp"
#include "stan/model/losses.hpp"
#include "stan/numerics/ops.hpp"

namespace stan::model {

using num::Tensor;

namespace {

std::vector<Linear> make_classifier(const ModelConfig& cfg, num::ParameterSet& params, const std::string& name,
                                    const std::string& group, num::Rng& rng) {
  const std::size_t width = cfg.head_activation == HeadActivation::gated ? 2 * cfg.head_hidden : cfg.head_hidden;
  std::vector<Linear> layers;
  layers.push_back(Linear::create(cfg.d_model, width, params, name + ".layer0", group, rng));
  layers.push_back(Linear::create(cfg.head_hidden, width, params, name + ".layer1", group, rng));
  layers.push_back(Linear::create(cfg.head_hidden, cfg.n_classes, params, name + ".layer2", group, rng));
  return layers;
}

}  // namespace

StanModel::StanModel(const ModelConfig& cfg, num::ParameterSet& params, num::Rng& rng)
    : cfg_(cfg), table_(std::make_shared<PositionalTable>(cfg.max_scenes, cfg.d_model)) {
  cfg_.validate();
  const std::size_t d = cfg_.d_model;
  if (cfg_.uses_spatial()) cls_spatial_ = params.add("cls.spatial", "cls", num::normal_init({1, d}, cfg_.cls_init_std, rng));
  if (cfg_.uses_temporal()) cls_temporal_ = params.add("cls.temporal", "cls", num::normal_init({1, d}, cfg_.cls_init_std, rng));
  if (cfg_.uses_spatial()) proj_spatial_ = Linear::create(cfg_.spatial_dim, d, params, "proj.spatial", "projections", rng);
  if (cfg_.uses_temporal()) proj_temporal_ = Linear::create(cfg_.temporal_dim, d, params, "proj.temporal", "projections", rng);
  if (cfg_.standardize_inputs && cfg_.uses_spatial()) {
    stats_spatial_ = {params.add("input.spatial.shift", "input_stats", Tensor({cfg_.spatial_dim}, std::vector<double>(cfg_.spatial_dim, 0.0))),
                      params.add("input.spatial.scale", "input_stats", Tensor({cfg_.spatial_dim}, std::vector<double>(cfg_.spatial_dim, 1.0)))};
  }
  if (cfg_.standardize_inputs && cfg_.uses_temporal()) {
    stats_temporal_ = {params.add("input.temporal.shift", "input_stats", Tensor({cfg_.temporal_dim}, std::vector<double>(cfg_.temporal_dim, 0.0))),
                       params.add("input.temporal.scale", "input_stats", Tensor({cfg_.temporal_dim}, std::vector<double>(cfg_.temporal_dim, 1.0)))};
  }
  if (cfg_.aggregator == Aggregator::transformer) {
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      if (cfg_.uses_spatial()) {
        spatial_blocks_.push_back(EncoderBlock::create(d, cfg_.ffn_hidden, params,
                                                       "spatial.layer" + std::to_string(l), "spatial_blocks", rng));
      }
      if (cfg_.uses_temporal()) {
        temporal_blocks_.push_back(EncoderBlock::create(d, cfg_.ffn_hidden, params,
                                                        "temporal.layer" + std::to_string(l), "temporal_blocks", rng));
      }
    }
  }
  q_in_ = Linear::create(d, cfg_.q_hidden, params, "q.in", "q", rng);
  q_out_ = Linear::create(cfg_.q_hidden, d, params, "q.out", "q", rng);
  fusion_norm_ = LayerNormParams::create(d, params, "fusion.norm", "fusion_norm");
  if (cfg_.fusion == Fusion::gated && cfg_.streams == StreamSelection::both) {
    gate_ = Linear::create(2 * d, d, params, "fusion.gate", "gate", rng);
  }
  classifier_ = make_classifier(cfg_, params, "classifier", "classifier", rng);
  if (cfg_.fusion == Fusion::distill) {
    teacher_norm_ = LayerNormParams::create(d, params, "teacher.norm", "teacher_head");
    teacher_classifier_ = make_classifier(cfg_, params, "teacher.classifier", "teacher_head", rng);
  }
}

void StanModel::set_positional_table(std::shared_ptr<const PositionalTable> table) {
  if (!table || table->d_model() != cfg_.d_model || table->max_scenes() != cfg_.max_scenes) {
    throw DimensionError("replacement positional table does not match the model configuration");
  }
  table_ = std::move(table);
}

void StanModel::set_input_statistics(bool spatial, std::span<const double> mean, std::span<const double> stddev) {
  if (!cfg_.standardize_inputs) throw ContractError("set_input_statistics: standardize_inputs is off");
  if (spatial ? !cfg_.uses_spatial() : !cfg_.uses_temporal()) throw ContractError("set_input_statistics: stream is inactive");
  InputStats& st = spatial ? stats_spatial_ : stats_temporal_;
  const std::size_t d = st.shift.size();
  if (mean.size() != d || stddev.size() != d) throw DimensionError("set_input_statistics: expected " + std::to_string(d) + " values");
  auto shift = st.shift.mutable_values();
  auto scale = st.scale.mutable_values();
  for (std::size_t j = 0; j < d; ++j) {
    if (!(stddev[j] > 0.0)) throw ContractError("set_input_statistics: standard deviations must be positive");
    shift[j] = -mean[j];
    scale[j] = 1.0 / stddev[j];
  }
}

Tensor StanModel::build_stream(const Tensor& feats, const Tensor& cls, const Linear& proj,
                               const InputStats& stats) const {
  if (feats.rank() != 2 || feats.dim(1) != proj.w.dim(0)) {
    throw DimensionError("stream features " + num::shape_string(feats.shape()) + " do not match projection input " +
                         std::to_string(proj.w.dim(0)));
  }
  const std::size_t n = feats.dim(0);
  if (n > cfg_.max_scenes) {
    throw SequenceLengthError(std::to_string(n) + " scenes exceed max_scenes = " + std::to_string(cfg_.max_scenes));
  }
  const Tensor x = cfg_.standardize_inputs ? num::mul_row(num::add_row(feats, stats.shift), stats.scale) : feats;
  const Tensor parts[] = {cls, proj(x)};
  Tensor tokens = num::concat_rows(parts);
  if (cfg_.positional) tokens = num::add(tokens, table_->rows(n + 1));
  return tokens;
}

TokenSequences StanModel::build_sequences(const std::optional<Tensor>& spatial,
                                          const std::optional<Tensor>& temporal) const {
  if (cfg_.uses_spatial() != spatial.has_value() || cfg_.uses_temporal() != temporal.has_value()) {
    throw ContractError("build_sequences: supplied streams do not match the configured stream selection");
  }
  if (spatial && temporal && spatial->dim(0) != temporal->dim(0)) {
    throw DimensionError("spatial and temporal streams disagree on the scene count");
  }
  TokenSequences seqs;
  if (spatial) seqs.spatial = build_stream(*spatial, cls_spatial_, proj_spatial_, stats_spatial_);
  if (temporal) seqs.temporal = build_stream(*temporal, cls_temporal_, proj_temporal_, stats_temporal_);
  return seqs;
}

Tensor StanModel::run_stream(const Tensor& tokens, const std::vector<EncoderBlock>& blocks) const {
  if (cfg_.aggregator == Aggregator::avgpool) {
    const std::size_t n = tokens.dim(0) - 1;
    const Tensor scenes = num::slice_rows(tokens, 1, n);
    const Tensor parts[] = {num::reshape(num::mean_axis(scenes, 0), {1, tokens.dim(1)}), scenes};
    return num::concat_rows(parts);
  }
  Tensor x = tokens;
  for (const auto& block : blocks) x = encoder_block(x, block, cfg_.n_heads, cfg_.ln_eps);
  return x;
}

StreamOutputs StanModel::encode_streams(const TokenSequences& seqs) const {
  StreamOutputs out;
  if (seqs.spatial) out.spatial = run_stream(*seqs.spatial, spatial_blocks_);
  if (seqs.temporal) out.temporal = run_stream(*seqs.temporal, temporal_blocks_);
  return out;
}

Tensor StanModel::project_cls(const Tensor& cls) const { return q_out_(num::gelu(q_in_(cls))); }

Tensor StanModel::classify(const Tensor& x, const std::vector<Linear>& layers) const {
  Tensor h = x;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = layers[i](h);
    if (cfg_.head_activation == HeadActivation::gated) {
      const std::size_t half = h.dim(1) / 2;
      h = num::mul(num::slice_cols(h, 0, half), num::sigmoid(num::slice_cols(h, half, half)));
    } else {
      h = num::gelu(h);
    }
  }
  return layers.back()(h);
}

ForwardOutput StanModel::head_from_cls(const std::optional<Tensor>& spatial_cls,
                                       const std::optional<Tensor>& temporal_cls) const {
  ForwardOutput out;
  out.spatial_cls = spatial_cls;
  out.temporal_cls = temporal_cls;
  if (spatial_cls) out.q_spatial = project_cls(*spatial_cls);
  if (temporal_cls) out.q_temporal = project_cls(*temporal_cls);

  if (cfg_.fusion == Fusion::distill && out.q_spatial && out.q_temporal) {
    // Student: spatial stream through the main head. Teacher: temporal stream.
    out.fused_pre_norm = *out.q_spatial;
    out.logits = classify(fusion_norm_(*out.q_spatial, cfg_.ln_eps), classifier_);
    out.teacher_logits = classify(teacher_norm_(*out.q_temporal, cfg_.ln_eps), teacher_classifier_);
    return out;
  }

  if (out.q_spatial && out.q_temporal) {
    if (cfg_.fusion == Fusion::gated) {
      const Tensor both[] = {*out.q_spatial, *out.q_temporal};
      const Tensor g = num::sigmoid(gate_(num::concat_cols(both)));
      out.fused_pre_norm = num::add(num::mul(g, *out.q_spatial), num::mul(num::one_minus(g), *out.q_temporal));
    } else {
      out.fused_pre_norm = num::add(*out.q_spatial, num::scale(*out.q_temporal, cfg_.lambda));
    }
  } else if (out.q_spatial) {
    out.fused_pre_norm = *out.q_spatial;
  } else if (out.q_temporal) {
    out.fused_pre_norm = *out.q_temporal;
  } else {
    throw ContractError("head: no stream output supplied");
  }
  out.logits = classify(fusion_norm_(out.fused_pre_norm, cfg_.ln_eps), classifier_);
  return out;
}

ForwardOutput StanModel::head(const StreamOutputs& outputs) const {
  std::optional<Tensor> s, t;
  if (outputs.spatial) s = num::slice_rows(*outputs.spatial, 0, 1);
  if (outputs.temporal) t = num::slice_rows(*outputs.temporal, 0, 1);
  return head_from_cls(s, t);
}

ForwardOutput StanModel::forward(const TokenSequences& seqs) const { return head(encode_streams(seqs)); }

Tensor StanModel::loss(const ForwardOutput& out, const Tensor& targets) const {
  Tensor y = targets;
  if (y.shape() != out.logits.shape()) y = num::reshape(targets, out.logits.shape());
  if (cfg_.fusion == Fusion::distill && out.teacher_logits) {
    const Tensor student = distillation_loss(out.logits, *out.teacher_logits, y, cfg_.distill_temperature,
                                             cfg_.distill_alpha);
    return num::add(student, fusion_loss(*out.teacher_logits, y));
  }
  return fusion_loss(out.logits, y);
}

}  // namespace stan::model
