#include "stan/model/config_json.hpp"

#include <array>
#include <set>
#include <string>
#include <utility>

#include "stan/errors.hpp"

namespace stan::model {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view what, std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : table) {
    if (!allowed.empty()) allowed += ", ";
    allowed += name;
  }
  throw ContractError("invalid " + std::string(what) + " '" + std::string(s) + "' (expected one of: " + allowed + ")");
}

constexpr std::array<std::pair<std::string_view, Mode>, 2> kModes{{{"small", Mode::small}, {"large", Mode::large}}};
constexpr std::array<std::pair<std::string_view, Fusion>, 3> kFusions{
    {{"sum", Fusion::sum}, {"gated", Fusion::gated}, {"distill", Fusion::distill}}};
constexpr std::array<std::pair<std::string_view, StreamSelection>, 3> kStreams{
    {{"both", StreamSelection::both}, {"spatial", StreamSelection::spatial}, {"temporal", StreamSelection::temporal}}};
constexpr std::array<std::pair<std::string_view, Aggregator>, 2> kAggregators{
    {{"transformer", Aggregator::transformer}, {"avgpool", Aggregator::avgpool}}};
constexpr std::array<std::pair<std::string_view, HeadActivation>, 2> kActivations{
    {{"gated", HeadActivation::gated}, {"gelu", HeadActivation::gelu}}};
constexpr std::array<std::pair<std::string_view, InputKind>, 2> kInputs{
    {{"frames", InputKind::frames}, {"features", InputKind::features}}};

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

void check_keys(const json& j, std::initializer_list<std::string_view> known, std::string_view section) {
  if (!j.is_object()) throw ContractError(std::string(section) + " config must be a JSON object");
  const std::set<std::string_view> allowed(known);
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ContractError("unknown " + std::string(section) + " config key '" + item.key() + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ContractError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

std::string_view to_string(Mode m) { return name_of(m, kModes); }
std::string_view to_string(Fusion f) { return name_of(f, kFusions); }
std::string_view to_string(StreamSelection s) { return name_of(s, kStreams); }
std::string_view to_string(Aggregator a) { return name_of(a, kAggregators); }
std::string_view to_string(HeadActivation h) { return name_of(h, kActivations); }
std::string_view to_string(InputKind k) { return name_of(k, kInputs); }

Mode parse_mode(std::string_view s) { return parse_enum("mode", s, kModes); }
Fusion parse_fusion(std::string_view s) { return parse_enum("fusion", s, kFusions); }
StreamSelection parse_streams(std::string_view s) { return parse_enum("streams", s, kStreams); }
Aggregator parse_aggregator(std::string_view s) { return parse_enum("aggregator", s, kAggregators); }
HeadActivation parse_head_activation(std::string_view s) { return parse_enum("head_activation", s, kActivations); }
InputKind parse_input_kind(std::string_view s) { return parse_enum("input", s, kInputs); }

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0) throw ContractError("d_model and n_heads must be positive");
  if (d_model % n_heads != 0) {
    throw ContractError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (d_model % 2 != 0) throw ContractError("d_model must be even for the sinusoidal table");
  if (n_classes == 0) throw ContractError("n_classes must be positive");
  if (max_scenes == 0) throw ContractError("max_scenes must be positive");
  if (ffn_hidden == 0 || q_hidden == 0 || head_hidden == 0) throw ContractError("hidden widths must be positive");
  if (spatial_dim == 0 || temporal_dim == 0) throw ContractError("feature dims must be positive");
  if (!(lambda >= 0.0)) throw ContractError("lambda must be >= 0");
  if (!(ln_eps > 0.0)) throw ContractError("ln_eps must be > 0");
  if (!(distill_temperature > 0.0)) throw ContractError("distill_temperature must be > 0");
  if (!(distill_alpha >= 0.0 && distill_alpha <= 1.0)) throw ContractError("distill_alpha must lie in [0, 1]");
  if (fusion == Fusion::distill && streams != StreamSelection::both) {
    throw ContractError("distill fusion needs both streams");
  }
}

json to_json(const ModelConfig& c) {
  return json{{"d_model", c.d_model},
              {"n_heads", c.n_heads},
              {"n_layers", c.n_layers},
              {"n_classes", c.n_classes},
              {"max_scenes", c.max_scenes},
              {"ffn_hidden", c.ffn_hidden},
              {"q_hidden", c.q_hidden},
              {"head_hidden", c.head_hidden},
              {"spatial_dim", c.spatial_dim},
              {"temporal_dim", c.temporal_dim},
              {"lambda", c.lambda},
              {"mode", to_string(c.mode)},
              {"fusion", to_string(c.fusion)},
              {"streams", to_string(c.streams)},
              {"aggregator", to_string(c.aggregator)},
              {"head_activation", to_string(c.head_activation)},
              {"positional", c.positional},
              {"standardize_inputs", c.standardize_inputs},
              {"freeze_spatial_encoder", c.freeze_spatial_encoder},
              {"ln_eps", c.ln_eps},
              {"cls_init_std", c.cls_init_std},
              {"distill_temperature", c.distill_temperature},
              {"distill_alpha", c.distill_alpha}};
}

ModelConfig model_config_from_json(const json& j) {
  check_keys(j,
             {"d_model", "n_heads", "n_layers", "n_classes", "max_scenes", "ffn_hidden", "q_hidden", "head_hidden",
              "spatial_dim", "temporal_dim", "lambda", "mode", "fusion", "streams", "aggregator", "head_activation",
              "positional", "standardize_inputs", "freeze_spatial_encoder", "ln_eps", "cls_init_std", "distill_temperature",
              "distill_alpha"},
             "model");
  ModelConfig c;
  read(j, "d_model", c.d_model);
  read(j, "n_heads", c.n_heads);
  read(j, "n_layers", c.n_layers);
  read(j, "n_classes", c.n_classes);
  read(j, "max_scenes", c.max_scenes);
  read(j, "ffn_hidden", c.ffn_hidden);
  read(j, "q_hidden", c.q_hidden);
  read(j, "head_hidden", c.head_hidden);
  read(j, "spatial_dim", c.spatial_dim);
  read(j, "temporal_dim", c.temporal_dim);
  read(j, "lambda", c.lambda);
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("fusion")) c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  if (j.contains("streams")) c.streams = parse_streams(j.at("streams").get<std::string>());
  if (j.contains("aggregator")) c.aggregator = parse_aggregator(j.at("aggregator").get<std::string>());
  if (j.contains("head_activation")) c.head_activation = parse_head_activation(j.at("head_activation").get<std::string>());
  read(j, "positional", c.positional);
  read(j, "standardize_inputs", c.standardize_inputs);
  read(j, "freeze_spatial_encoder", c.freeze_spatial_encoder);
  read(j, "ln_eps", c.ln_eps);
  read(j, "cls_init_std", c.cls_init_std);
  read(j, "distill_temperature", c.distill_temperature);
  read(j, "distill_alpha", c.distill_alpha);
  return c;
}

json to_json(const enc::EncoderConfig& c) {
  return json{{"channels", c.channels},         {"kernel", c.kernel},
              {"temporal_kernel", c.temporal_kernel}, {"spatial_dim", c.spatial_dim},
              {"temporal_dim", c.temporal_dim}, {"clip_frames", c.clip_frames},
              {"norm_eps", c.norm_eps}};
}

enc::EncoderConfig encoder_config_from_json(const json& j) {
  check_keys(j, {"channels", "kernel", "temporal_kernel", "spatial_dim", "temporal_dim", "clip_frames", "norm_eps"},
             "encoder");
  enc::EncoderConfig c;
  read(j, "channels", c.channels);
  read(j, "kernel", c.kernel);
  read(j, "temporal_kernel", c.temporal_kernel);
  read(j, "spatial_dim", c.spatial_dim);
  read(j, "temporal_dim", c.temporal_dim);
  read(j, "clip_frames", c.clip_frames);
  read(j, "norm_eps", c.norm_eps);
  return c;
}

json to_json(const scene::PipelineConfig& c) {
  return json{{"window", c.detector.window},
              {"threshold", c.detector.threshold},
              {"min_scene_len", c.detector.min_scene_len},
              {"analysis_res", c.detector.analysis_res},
              {"frames_per_scene", c.sampling.frames_per_scene},
              {"low_res", c.sampling.low_res},
              {"high_res", c.sampling.high_res}};
}

scene::PipelineConfig pipeline_config_from_json(const json& j) {
  check_keys(j, {"window", "threshold", "min_scene_len", "analysis_res", "frames_per_scene", "low_res", "high_res"},
             "pipeline");
  scene::PipelineConfig c;
  read(j, "window", c.detector.window);
  read(j, "threshold", c.detector.threshold);
  read(j, "min_scene_len", c.detector.min_scene_len);
  read(j, "analysis_res", c.detector.analysis_res);
  read(j, "frames_per_scene", c.sampling.frames_per_scene);
  read(j, "low_res", c.sampling.low_res);
  read(j, "high_res", c.sampling.high_res);
  return c;
}

json to_json(const NetworkConfig& c) {
  return json{{"model", to_json(c.model)},
              {"encoder", to_json(c.encoder)},
              {"pipeline", to_json(c.pipeline)},
              {"input", to_string(c.input)},
              {"seed", c.seed}};
}

NetworkConfig network_config_from_json(const json& j) {
  check_keys(j, {"model", "encoder", "pipeline", "input", "seed"}, "network");
  NetworkConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
  if (j.contains("pipeline")) c.pipeline = pipeline_config_from_json(j.at("pipeline"));
  if (j.contains("input")) c.input = parse_input_kind(j.at("input").get<std::string>());
  read(j, "seed", c.seed);
  return c;
}

}  // namespace stan::model
