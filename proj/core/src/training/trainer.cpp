#include "stan/training/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "stan/errors.hpp"
#include "stan/metrics/report.hpp"
#include "stan/numerics/ops.hpp"
#include "stan/numerics/tape.hpp"

namespace stan::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

num::Tensor targets_tensor(const std::vector<double>& t) { return num::Tensor({1, t.size()}, t); }

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size == 0) throw ContractError("batch_size must be >= 1");
  if (eval_every == 0) throw ContractError("eval_every must be >= 1");
}

json to_json(const TrainConfig& c) {
  return json{{"lr", c.adam.learning_rate}, {"beta1", c.adam.beta1},       {"beta2", c.adam.beta2},
              {"eps", c.adam.eps},          {"grad_clip", c.adam.grad_clip}, {"batch_size", c.batch_size},
              {"epochs", c.epochs},         {"seed", c.seed},               {"eval_every", c.eval_every},
              {"threshold", c.threshold}};
}

BatchGradients batch_gradients(const model::Network& network, std::span<const Sample* const> batch, std::size_t workers) {
  if (batch.empty()) throw ContractError("empty batch");
  const auto& params = network.params();
  std::vector<double> losses(batch.size());
  std::vector<std::vector<std::vector<double>>> per_sample(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    num::Tape tape;
    num::Tensor loss;
    {
      num::TapeScope scope(tape);
      loss = network.loss(batch[i]->input, targets_tensor(batch[i]->targets));
    }
    const num::GradientSet g = tape.backward(loss);
    losses[i] = loss.item();
    auto& out = per_sample[i];
    out.reserve(params.size());
    for (const auto& p : params.all()) out.push_back(g.of(p.value));
  });

  BatchGradients bg;
  bg.grads.reserve(params.size());
  for (const auto& p : params.all()) bg.grads.emplace_back(p.value.size(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    bg.loss += losses[i];
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& dst = bg.grads[k];
      const auto& src = per_sample[i][k];
      for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  bg.loss *= inv;
  for (auto& g : bg.grads) {
    for (auto& x : g) x *= inv;
  }
  return bg;
}

void cache_frozen_features(const model::Network& network, Dataset& dataset, std::size_t workers) {
  if (!network.config().model.uses_temporal() || !network.is_frozen("temporal_encoder")) return;
  if (network.temporal_encoder() == nullptr) return;
  parallel_for(dataset.samples.size(), workers, [&](std::size_t i) {
    auto& input = dataset.samples[i].input;
    if (input.temporal_features || input.scenes.empty()) return;
    num::NoGradScope no_grad;
    input.temporal_features = network.temporal_features(input);
    for (auto& s : input.scenes) {
      s.clip.clear();
      s.clip.shrink_to_fit();
    }
  });
}

void calibrate_input_statistics(model::Network& network, const Dataset& dataset, std::size_t workers) {
  const auto& mc = network.config().model;
  if (!mc.standardize_inputs) return;
  if (dataset.samples.empty()) throw ContractError("cannot calibrate input statistics on an empty dataset");
  for (const bool spatial : {true, false}) {
    if (spatial ? !mc.uses_spatial() : !mc.uses_temporal()) continue;
    std::vector<num::Tensor> feats(dataset.samples.size());
    parallel_for(feats.size(), workers, [&](std::size_t i) {
      num::NoGradScope no_grad;
      const auto& input = dataset.samples[i].input;
      feats[i] = spatial ? network.spatial_features(input) : network.temporal_features(input);
    });
    const std::size_t d = spatial ? mc.spatial_dim : mc.temporal_dim;
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    std::size_t rows = 0;
    for (const auto& f : feats) {
      for (std::size_t r = 0; r < f.dim(0); ++r)
        for (std::size_t j = 0; j < d; ++j) mean[j] += f.values()[r * d + j];
      rows += f.dim(0);
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (const auto& f : feats) {
      for (std::size_t r = 0; r < f.dim(0); ++r)
        for (std::size_t j = 0; j < d; ++j) {
          const double e = f.values()[r * d + j] - mean[j];
          var[j] += e * e;
        }
    }
    std::vector<double> stddev(d);
    // The floor keeps constant dimensions finite.
    for (std::size_t j = 0; j < d; ++j) stddev[j] = std::sqrt(var[j] / static_cast<double>(rows) + 1e-8);
    network.model().set_input_statistics(spatial, mean, stddev);
  }
}

Trainer::Trainer(model::Network& network, TrainConfig cfg) : network_(network), cfg_(std::move(cfg)) {
  cfg_.validate();
  state_ = OptimizerState::zeros_like(network_.params());
  for (const auto& p : network_.params().all()) frozen_.push_back(network_.is_frozen(p.group));
}

double Trainer::train_step(std::span<const Sample* const> batch) {
  BatchGradients bg = batch_gradients(network_, batch, cfg_.workers);
  adam_step(network_.params(), bg.grads, state_, cfg_.adam, frozen_);
  return bg.loss;
}

metrics::EvalSet predict(const model::Network& network, const Dataset& dataset, std::size_t workers,
                         std::optional<std::uint64_t> scene_order_seed) {
  metrics::EvalSet set;
  set.n_samples = dataset.samples.size();
  set.n_classes = network.config().model.n_classes;
  set.class_names = dataset.class_names;
  if (!set.class_names.empty() && set.class_names.size() != set.n_classes) {
    throw DimensionError("dataset has " + std::to_string(set.class_names.size()) + " classes, model expects " +
                         std::to_string(set.n_classes));
  }
  set.scores.assign(set.n_samples * set.n_classes, 0.0);
  set.labels.assign(set.n_samples * set.n_classes, 0);

  std::vector<std::vector<std::size_t>> orders(set.n_samples);
  if (scene_order_seed) {
    num::Rng rng(*scene_order_seed);
    for (std::size_t i = 0; i < set.n_samples; ++i) orders[i] = seeded_permutation(dataset.samples[i].input.scene_count(), rng);
  }

  parallel_for(set.n_samples, workers, [&](std::size_t i) {
    num::NoGradScope no_grad;
    const Sample& s = dataset.samples[i];
    if (s.targets.size() != set.n_classes) throw DimensionError("sample " + s.video_id + " has a mismatched label vector");
    const model::ForwardOutput out =
        scene_order_seed ? network.forward(permute_scenes(s.input, orders[i])) : network.forward(s.input);
    for (std::size_t c = 0; c < set.n_classes; ++c) {
      const double z = out.logits[c];
      set.scores[i * set.n_classes + c] = 1.0 / (1.0 + std::exp(-z));
      set.labels[i * set.n_classes + c] = s.targets[c] > 0.5 ? 1 : 0;
    }
  });
  return set;
}

metrics::MetricsReport evaluate(const model::Network& network, const Dataset& dataset, std::size_t workers, double threshold,
                                std::optional<std::uint64_t> scene_order_seed) {
  return metrics::compute_report(predict(network, dataset, workers, scene_order_seed), threshold);
}

FitResult fit(model::Network& network, Dataset& train, Dataset& val, const TrainConfig& cfg, const FitOptions& options) {
  cfg.validate();
  if (train.samples.empty()) throw ContractError("training set is empty");
  FitResult result;
  fs::create_directories(options.out_dir);
  result.log_file = options.out_dir / "train_log.jsonl";
  result.best_checkpoint = options.out_dir / "best.ckpt";
  result.last_checkpoint = options.out_dir / "last.ckpt";

  Trainer trainer(network, cfg);
  std::size_t start_epoch = 0;
  std::size_t step = 0;
  if (options.resume) {
    const Checkpoint ck = read_checkpoint(*options.resume);
    restore_parameters(network, ck);
    if (!ck.optimizer) throw FormatError("resume checkpoint has no optimizer state");
    trainer.optimizer() = *ck.optimizer;
    start_epoch = ck.meta.epoch;
    step = ck.meta.step;
    if (ck.meta.extra.contains("best_map")) {
      result.best_map = ck.meta.extra.at("best_map").get<double>();
      result.best_epoch = ck.meta.extra.at("best_epoch").get<std::size_t>();
    }
  }

  cache_frozen_features(network, train, cfg.workers);
  cache_frozen_features(network, val, cfg.workers);
  if (!options.resume) calibrate_input_statistics(network, train, cfg.workers);
  Dataset& eval_set = val.samples.empty() ? train : val;

  // A resumed run appends to the existing log; keep only lines up to the resume point.
  std::vector<std::string> kept;
  if (options.resume && fs::exists(result.log_file)) {
    std::ifstream in(result.log_file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.at("epoch").get<std::size_t>() <= start_epoch) {
        kept.push_back(line);
        result.log.push_back(j);
      }
    }
  }
  std::ofstream log(result.log_file, std::ios::binary | std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + result.log_file.string());
  for (const auto& l : kept) log << l << "\n";

  auto meta_for = [&](std::size_t epoch) {
    CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.epoch = epoch;
    meta.step = step;
    meta.extra = {{"train", to_json(cfg)}, {"best_map", result.best_map}, {"best_epoch", result.best_epoch}};
    return meta;
  };

  const std::size_t n = train.samples.size();
  for (std::size_t epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    num::Rng rng(epoch_seed(cfg.seed, epoch));
    const auto order = seeded_permutation(n, rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<const Sample*> batch;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      batch.clear();
      for (std::size_t k = begin; k < std::min(n, begin + cfg.batch_size); ++k) batch.push_back(&train.samples[order[k]]);
      loss_sum += trainer.train_step(batch);
      ++batches;
      ++step;
    }
    const double epoch_loss = loss_sum / static_cast<double>(batches);

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const metrics::MetricsReport report = evaluate(network, eval_set, cfg.workers, cfg.threshold);
      json rec{{"epoch", epoch},   {"step", step},       {"loss", epoch_loss}, {"mAP", report.weighted_map},
               {"P_w", report.p_w}, {"R_w", report.r_w}, {"F1_w", report.f1_w}};
      log << rec.dump() << "\n";
      log.flush();
      result.log.push_back(rec);
      if (options.on_log) options.on_log(rec);
      if (report.weighted_map > result.best_map) {
        result.best_map = report.weighted_map;
        result.best_epoch = epoch;
        save_checkpoint(result.best_checkpoint, network, &trainer.optimizer(), meta_for(epoch));
      }
      result.final_report = report;
    }
    save_checkpoint(result.last_checkpoint, network, &trainer.optimizer(), meta_for(epoch));
  }
  return result;
}

}  // namespace stan::train
