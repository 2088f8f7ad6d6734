#pragma once

#include <nlohmann/json.hpp>

#include "stan/encoders/conv_encoders.hpp"
#include "stan/model/config.hpp"
#include "stan/model/network.hpp"
#include "stan/scene/segmentation.hpp"

namespace stan::model {

std::string_view to_string(InputKind k);
InputKind parse_input_kind(std::string_view s);

// Keys absent from the JSON keep their default values; unknown keys are
// rejected with a ContractError.
nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const enc::EncoderConfig& cfg);
nlohmann::json to_json(const scene::PipelineConfig& cfg);
nlohmann::json to_json(const NetworkConfig& cfg);

ModelConfig model_config_from_json(const nlohmann::json& j);
enc::EncoderConfig encoder_config_from_json(const nlohmann::json& j);
scene::PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
NetworkConfig network_config_from_json(const nlohmann::json& j);

}  // namespace stan::model
