#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stan/model/network.hpp"
#include "stan/training/adam.hpp"

namespace stan::train {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::size_t step = 0;
  // Free-form training state (train config, best metric, ...).
  nlohmann::json extra = nlohmann::json::object();
};

struct ParameterRecord {
  std::string name;
  std::string group;
  num::Shape shape;
  std::vector<double> data;
};

struct Checkpoint {
  model::NetworkConfig config;
  CheckpointMeta meta;
  std::vector<ParameterRecord> parameters;
  std::optional<OptimizerState> optimizer;
};

// Layout: "STANCKP1", u32-LE header length, JSON header (config, seed,
// epoch, step, parameter manifest with shapes, optimizer step), then every
// parameter as f64-LE in manifest order, followed by the Adam first and
// second moments in the same order when an optimizer state is stored.
void save_checkpoint(const std::filesystem::path& path, const model::Network& network, const OptimizerState* optimizer,
                     const CheckpointMeta& meta);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies stored values into a network built from the same configuration.
// Throws FormatError when names or shapes differ.
void restore_parameters(model::Network& network, const Checkpoint& ckpt);
std::unique_ptr<model::Network> network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace stan::train
