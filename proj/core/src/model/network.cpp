#include "stan/model/network.hpp"

#include "stan/errors.hpp"
#include "stan/numerics/ops.hpp"
#include "stan/numerics/tape.hpp"

namespace stan::model {

using num::Tensor;

void NetworkConfig::validate() const {
  model.validate();
  encoder.validate();
  pipeline.detector.validate();
  pipeline.sampling.validate();
  if (input == InputKind::frames) {
    if (encoder.spatial_dim != model.spatial_dim || encoder.temporal_dim != model.temporal_dim) {
      throw ContractError("encoder output dims must equal the model's spatial_dim/temporal_dim");
    }
    if (encoder.clip_frames != pipeline.sampling.frames_per_scene) {
      throw ContractError("encoder clip_frames must equal frames_per_scene");
    }
  }
}

std::size_t SampleInput::scene_count() const {
  if (!scenes.empty()) return scenes.size();
  if (spatial_features) return spatial_features->dim(0);
  if (temporal_features) return temporal_features->dim(0);
  return 0;
}

Network::Network(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  num::Rng rng(cfg_.seed);
  if (cfg_.input == InputKind::frames) {
    if (cfg_.model.uses_spatial()) {
      spatial_encoder_ = std::make_unique<enc::SpatialEncoder>(cfg_.encoder, cfg_.pipeline.sampling.high_res, params_, rng);
    }
    if (cfg_.model.uses_temporal()) {
      temporal_encoder_ = std::make_unique<enc::TemporalEncoder>(cfg_.encoder, cfg_.pipeline.sampling.low_res, params_, rng);
    }
  }
  model_ = std::make_unique<StanModel>(cfg_.model, params_, rng);
}

bool Network::is_frozen(const std::string& group) const {
  if (group == "input_stats") return true;
  if (group == "temporal_encoder") return cfg_.model.mode == Mode::small;
  if (group == "spatial_encoder") return cfg_.model.freeze_spatial_encoder;
  return false;
}

Tensor Network::spatial_features(const SampleInput& input) const {
  if (input.spatial_features) return *input.spatial_features;
  if (!spatial_encoder_) throw ContractError("sample has no spatial features and the network has no spatial encoder");
  if (input.scenes.empty()) throw ContractError("sample has no scenes");
  std::vector<scene::RgbImage> centers;
  centers.reserve(input.scenes.size());
  for (const auto& s : input.scenes) centers.push_back(s.center_frame);
  const Tensor frames = enc::images_to_tensor(centers);
  if (is_frozen("spatial_encoder")) {
    num::NoGradScope no_grad;
    return spatial_encoder_->encode(frames);
  }
  return spatial_encoder_->encode(frames);
}

Tensor Network::temporal_features(const SampleInput& input) const {
  if (input.temporal_features) return *input.temporal_features;
  if (!temporal_encoder_) throw ContractError("sample has no temporal features and the network has no temporal encoder");
  if (input.scenes.empty()) throw ContractError("sample has no scenes");
  std::vector<std::vector<scene::RgbImage>> clips;
  clips.reserve(input.scenes.size());
  for (const auto& s : input.scenes) clips.push_back(s.clip);
  const Tensor x = enc::clips_to_tensor(clips);
  if (is_frozen("temporal_encoder")) {
    num::NoGradScope no_grad;
    return temporal_encoder_->encode(x);
  }
  return temporal_encoder_->encode(x);
}

ForwardOutput Network::forward(const SampleInput& input) const {
  std::optional<Tensor> s, t;
  if (cfg_.model.uses_spatial()) s = spatial_features(input);
  if (cfg_.model.uses_temporal()) t = temporal_features(input);
  return model_->forward(model_->build_sequences(s, t));
}

Tensor Network::loss(const SampleInput& input, const Tensor& targets) const {
  return model_->loss(forward(input), targets);
}

}  // namespace stan::model
