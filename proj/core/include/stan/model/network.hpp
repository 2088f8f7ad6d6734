#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stan/encoders/conv_encoders.hpp"
#include "stan/model/stan_model.hpp"
#include "stan/numerics/parameters.hpp"
#include "stan/scene/segmentation.hpp"

namespace stan::model {

// frames: scenes are encoded by the convolutional encoders.
// features: per-scene vectors come from a feature store.
enum class InputKind { frames, features };

struct NetworkConfig {
  ModelConfig model;
  enc::EncoderConfig encoder;
  scene::PipelineConfig pipeline;
  InputKind input = InputKind::frames;
  std::uint64_t seed = 0;

  void validate() const;
};

// One video ready for the network: either its sampled scenes or its
// per-scene feature matrices.
struct SampleInput {
  std::vector<scene::SceneSegment> scenes;
  std::optional<num::Tensor> spatial_features;   // [n, d_s]
  std::optional<num::Tensor> temporal_features;  // [n, d_t]

  std::size_t scene_count() const;
};

// Encoders plus the two-stream model behind one parameter registry. The
// parameters are initialized from config.seed alone.
class Network {
 public:
  explicit Network(NetworkConfig cfg);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const NetworkConfig& config() const { return cfg_; }
  num::ParameterSet& params() { return params_; }
  const num::ParameterSet& params() const { return params_; }
  const StanModel& model() const { return *model_; }
  StanModel& model() { return *model_; }

  bool has_encoders() const { return spatial_encoder_ != nullptr || temporal_encoder_ != nullptr; }
  const enc::SpatialEncoder* spatial_encoder() const { return spatial_encoder_.get(); }
  const enc::TemporalEncoder* temporal_encoder() const { return temporal_encoder_.get(); }

  // Groups excluded from optimization: input statistics always, the temporal
  // encoder in small mode, the spatial encoder when freeze_spatial_encoder is set.
  bool is_frozen(const std::string& group) const;

  // Per-scene stream features, [n, d]. Frozen encoders run without recording.
  num::Tensor spatial_features(const SampleInput& input) const;
  num::Tensor temporal_features(const SampleInput& input) const;

  ForwardOutput forward(const SampleInput& input) const;
  num::Tensor loss(const SampleInput& input, const num::Tensor& targets) const;

 private:
  NetworkConfig cfg_;
  num::ParameterSet params_;
  std::unique_ptr<enc::SpatialEncoder> spatial_encoder_;
  std::unique_ptr<enc::TemporalEncoder> temporal_encoder_;
  std::unique_ptr<StanModel> model_;
};

}  // namespace stan::model
