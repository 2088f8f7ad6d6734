#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace stan::model {

// small: the temporal clip encoder is frozen; large: every group is trained.
enum class Mode { small, large };
// How the two CLS embeddings are combined before the classifier.
enum class Fusion { sum, gated, distill };
// Stream ablations.
enum class StreamSelection { both, spatial, temporal };
// transformer: CLS output of the encoder stack; avgpool: mean of the scene
// tokens (average-pool baseline).
enum class Aggregator { transformer, avgpool };
// Non-linearity between the classifier's layers.
enum class HeadActivation { gated, gelu };

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t n_classes = 4;
  std::size_t max_scenes = 64;
  std::size_t ffn_hidden = 256;
  std::size_t q_hidden = 64;
  std::size_t head_hidden = 64;
  std::size_t spatial_dim = 64;   // d_s of incoming spatial features
  std::size_t temporal_dim = 64;  // d_t of incoming temporal features
  double lambda = 0.6;
  Mode mode = Mode::small;
  Fusion fusion = Fusion::sum;
  StreamSelection streams = StreamSelection::both;
  Aggregator aggregator = Aggregator::transformer;
  HeadActivation head_activation = HeadActivation::gated;
  bool positional = true;
  // Shift and scale each feature dimension by fixed per-stream statistics
  // (group "input_stats", never optimized) before the projection.
  bool standardize_inputs = true;
  bool freeze_spatial_encoder = false;
  double ln_eps = 1e-5;
  double cls_init_std = 0.02;
  double distill_temperature = 2.0;
  double distill_alpha = 0.5;

  bool uses_spatial() const { return streams != StreamSelection::temporal; }
  bool uses_temporal() const { return streams != StreamSelection::spatial; }
  void validate() const;
};

std::string_view to_string(Mode m);
std::string_view to_string(Fusion f);
std::string_view to_string(StreamSelection s);
std::string_view to_string(Aggregator a);
std::string_view to_string(HeadActivation h);

// Throw ContractError naming the value when it is not a known option.
Mode parse_mode(std::string_view s);
Fusion parse_fusion(std::string_view s);
StreamSelection parse_streams(std::string_view s);
Aggregator parse_aggregator(std::string_view s);
HeadActivation parse_head_activation(std::string_view s);

}  // namespace stan::model
