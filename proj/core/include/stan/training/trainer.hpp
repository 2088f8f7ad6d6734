#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stan/metrics/metrics.hpp"
#include "stan/model/network.hpp"
#include "stan/training/adam.hpp"
#include "stan/training/checkpoint.hpp"
#include "stan/training/dataset.hpp"

namespace stan::train {

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  // Evaluate every eval_every epochs (and after the last one).
  std::size_t eval_every = 1;
  std::size_t workers = 1;
  double threshold = 0.5;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct BatchGradients {
  double loss = 0.0;  // mean over the batch
  std::vector<std::vector<double>> grads;  // one buffer per parameter, mean over the batch
};

// Mean loss and gradients of a batch. Each sample runs on its own tape;
// per-sample gradients are summed in sample order, so the result does not
// depend on the worker count.
BatchGradients batch_gradients(const model::Network& network, std::span<const Sample* const> batch, std::size_t workers);

// Precomputes the temporal features of every sample when the temporal
// encoder is frozen (small mode). The cached values are bitwise equal to what
// the frozen encoder would produce on each forward pass, so the dataset is
// only valid for networks sharing that encoder's weights afterwards.
void cache_frozen_features(const model::Network& network, Dataset& dataset, std::size_t workers);

// Sets the model's per-stream input statistics to the mean and standard
// deviation of each feature dimension over every scene of `dataset`, as
// produced by the network's current encoders. No-op when standardize_inputs
// is off. Deterministic for any worker count.
void calibrate_input_statistics(model::Network& network, const Dataset& dataset, std::size_t workers);

class Trainer {
 public:
  Trainer(model::Network& network, TrainConfig cfg);

  // One optimizer step on the batch; returns the mean loss before the update.
  double train_step(std::span<const Sample* const> batch);

  const OptimizerState& optimizer() const { return state_; }
  OptimizerState& optimizer() { return state_; }
  const std::vector<bool>& frozen_mask() const { return frozen_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  model::Network& network_;
  TrainConfig cfg_;
  OptimizerState state_;
  std::vector<bool> frozen_;
};

// Sigmoid scores of every sample. `scene_order_seed` shuffles the scene
// order of each sample before the forward pass.
metrics::EvalSet predict(const model::Network& network, const Dataset& dataset, std::size_t workers,
                         std::optional<std::uint64_t> scene_order_seed = std::nullopt);

metrics::MetricsReport evaluate(const model::Network& network, const Dataset& dataset, std::size_t workers,
                                double threshold = 0.5, std::optional<std::uint64_t> scene_order_seed = std::nullopt);

struct FitOptions {
  std::filesystem::path out_dir;
  // Continue from this checkpoint (written by an earlier fit with the same data).
  std::optional<std::filesystem::path> resume;
  // Called with every log record as it is written.
  std::function<void(const nlohmann::json&)> on_log;
};

struct FitResult {
  std::vector<nlohmann::json> log;
  double best_map = -1.0;
  std::size_t best_epoch = 0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path log_file;
  std::optional<metrics::MetricsReport> final_report;
};

// Epoch loop with seeded shuffling. The order of epoch e depends only on
// (seed, e), so a run resumed from the checkpoint of epoch e reproduces the
// remaining epochs exactly. After each evaluation a JSON line
// {epoch, step, loss, mAP, P_w, R_w, F1_w} is appended to train_log.jsonl;
// last.ckpt is written after every epoch and best.ckpt whenever the
// validation mAP improves. Without validation samples the training set is
// evaluated.
FitResult fit(model::Network& network, Dataset& train, Dataset& val, const TrainConfig& cfg, const FitOptions& options);

}  // namespace stan::train
