#include "stan/training/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "stan/numerics/tape.hpp"
#include "stan/training/dataset.hpp"

namespace stan::train {

GradcheckReport check_gradients(num::ParameterSet& params, const std::function<num::Tensor()>& loss_fn,
                                const GradcheckOptions& options, const std::vector<std::string>& skip_groups) {
  num::Tape tape;
  num::Tensor loss;
  {
    num::TapeScope scope(tape);
    loss = loss_fn();
  }
  const num::GradientSet grads = tape.backward(loss);

  num::Rng rng(options.seed);
  GradcheckReport report;
  report.passed = true;
  for (const auto& group : params.groups()) {
    if (std::find(skip_groups.begin(), skip_groups.end(), group) != skip_groups.end()) continue;
    // Flat coordinate space of the group: (parameter index, element).
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].group != group) continue;
      for (std::size_t e = 0; e < params[i].value.size(); ++e) coords.emplace_back(i, e);
    }
    if (coords.size() > options.coords_per_group) {
      const auto perm = seeded_permutation(coords.size(), rng);
      std::vector<std::pair<std::size_t, std::size_t>> picked;
      for (std::size_t k = 0; k < options.coords_per_group; ++k) picked.push_back(coords[perm[k]]);
      std::sort(picked.begin(), picked.end());
      coords = std::move(picked);
    }
    GroupCheck gc;
    gc.group = group;
    gc.coordinates = coords.size();
    std::size_t cached_param = params.size();
    std::vector<double> analytic;
    for (const auto& [pi, e] : coords) {
      num::Tensor value = params[pi].value;
      if (pi != cached_param) {
        analytic = grads.of(value);
        cached_param = pi;
      }
      auto data = value.mutable_values();
      const double original = data[e];
      double plus, minus;
      {
        num::NoGradScope no_grad;
        data[e] = original + options.step;
        plus = loss_fn().item();
        data[e] = original - options.step;
        minus = loss_fn().item();
      }
      data[e] = original;
      const double fd = (plus - minus) / (2.0 * options.step);
      const double a = analytic[e];
      const double abs_err = std::abs(a - fd);
      const double rel = abs_err / std::max({std::abs(a), std::abs(fd), options.floor});
      gc.max_abs_error = std::max(gc.max_abs_error, abs_err);
      if (gc.worst.empty() || rel > gc.max_rel_error) {
        gc.max_rel_error = rel;
        gc.worst = params[pi].name + "[" + std::to_string(e) + "]";
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, gc.max_rel_error);
    if (!(gc.max_rel_error < options.tolerance)) report.passed = false;
    report.groups.push_back(std::move(gc));
  }
  return report;
}

model::NetworkConfig gradcheck_network_config(std::uint64_t seed) {
  model::NetworkConfig cfg;
  cfg.seed = seed;
  cfg.input = model::InputKind::frames;
  cfg.model.d_model = 64;
  cfg.model.n_heads = 4;
  cfg.model.n_layers = 2;
  cfg.model.n_classes = 3;
  cfg.model.max_scenes = 8;
  cfg.model.ffn_hidden = 32;
  cfg.model.q_hidden = 16;
  cfg.model.head_hidden = 8;
  cfg.model.spatial_dim = 6;
  cfg.model.temporal_dim = 6;
  cfg.model.mode = model::Mode::large;
  cfg.encoder.channels = {3, 4};
  cfg.encoder.spatial_dim = 6;
  cfg.encoder.temporal_dim = 6;
  cfg.pipeline.sampling.low_res = 8;
  cfg.pipeline.sampling.high_res = 8;
  return cfg;
}

GradcheckReport run_model_gradcheck(std::uint64_t seed, model::Fusion fusion, GradcheckOptions options) {
  model::NetworkConfig cfg = gradcheck_network_config(seed);
  cfg.model.fusion = fusion;
  model::Network net(cfg);

  num::Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  auto random_image = [&](std::size_t res) {
    scene::RgbImage img(res, res);
    for (auto& px : img.pixels) px = static_cast<std::uint8_t>(rng() % 256);
    return img;
  };
  model::SampleInput input;
  const std::size_t n_scenes = 3;
  for (std::size_t k = 0; k < n_scenes; ++k) {
    scene::SceneSegment s;
    s.scene_index = k;
    s.start_idx = k * 12;
    s.end_idx = s.start_idx + 12;
    for (std::size_t f = 0; f < cfg.pipeline.sampling.frames_per_scene; ++f) s.clip.push_back(random_image(cfg.pipeline.sampling.low_res));
    s.center_frame = random_image(cfg.pipeline.sampling.high_res);
    input.scenes.push_back(std::move(s));
  }
  std::vector<double> y(cfg.model.n_classes, 0.0);
  y[rng() % y.size()] = 1.0;
  const num::Tensor targets({1, y.size()}, y);

  options.seed = seed;
  return check_gradients(net.params(), [&] { return net.loss(input, targets); }, options);
}

}  // namespace stan::train
