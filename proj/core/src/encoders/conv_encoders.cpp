#include "stan/encoders/conv_encoders.hpp"

#include <string>

#include "stan/errors.hpp"
#include "stan/numerics/ops.hpp"

namespace stan::enc {

using num::Shape;
using num::Tensor;

void EncoderConfig::validate() const {
  if (channels.empty()) throw ContractError("encoder needs at least one block");
  if (kernel % 2 == 0 || temporal_kernel % 2 == 0) throw ContractError("encoder kernels must be odd");
  if (spatial_dim == 0 || temporal_dim == 0 || clip_frames == 0) throw ContractError("encoder dims must be positive");
  if (!(norm_eps > 0)) throw ContractError("encoder norm_eps must be positive");
}

Tensor image_to_tensor(const scene::RgbImage& image) {
  std::vector<double> v(3 * image.height * image.width);
  const std::size_t plane = image.height * image.width;
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) v[c * plane + y * image.width + x] = image.at(y, x, c) / 255.0;
  return Tensor({3, image.height, image.width}, std::move(v));
}

Tensor images_to_tensor(std::span<const scene::RgbImage> images) {
  if (images.empty()) throw ContractError("images_to_tensor: no images");
  const std::size_t h = images.front().height, w = images.front().width;
  std::vector<double> v;
  v.reserve(images.size() * 3 * h * w);
  for (const auto& img : images) {
    if (img.height != h || img.width != w) throw DimensionError("images_to_tensor: mixed frame sizes");
    auto t = image_to_tensor(img);
    v.insert(v.end(), t.values().begin(), t.values().end());
  }
  return Tensor({images.size(), 3, h, w}, std::move(v));
}

Tensor clips_to_tensor(std::span<const std::vector<scene::RgbImage>> clips) {
  if (clips.empty()) throw ContractError("clips_to_tensor: no clips");
  const std::size_t frames = clips.front().size();
  std::vector<scene::RgbImage> flat;
  for (const auto& clip : clips) {
    if (clip.size() != frames) throw ContractError("clips_to_tensor: clips differ in length");
    flat.insert(flat.end(), clip.begin(), clip.end());
  }
  Tensor t = images_to_tensor(flat);
  return Tensor({clips.size(), frames, 3, t.dim(2), t.dim(3)}, std::vector<double>(t.values().begin(), t.values().end()));
}

SpatialEncoder::SpatialEncoder(const EncoderConfig& cfg, std::size_t input_res, num::ParameterSet& params,
                               num::Rng& rng, const std::string& group)
    : cfg_(cfg), input_res_(input_res) {
  cfg_.validate();
  std::size_t cin = 3, res = input_res;
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    const std::size_t cout = cfg_.channels[i];
    const std::string prefix = group + ".block" + std::to_string(i) + ".";
    Block b;
    b.w = params.add(prefix + "conv.w", group,
                     num::uniform_fan_in({cout, cin, cfg_.kernel, cfg_.kernel}, cin * cfg_.kernel * cfg_.kernel, rng));
    b.b = params.add(prefix + "conv.b", group, Tensor::zeros({cout}));
    b.gamma = params.add(prefix + "norm.gamma", group, Tensor::full({cout}, 1.0));
    b.beta = params.add(prefix + "norm.beta", group, Tensor::zeros({cout}));
    blocks_.push_back(b);
    cin = cout;
    if (res < 2) throw DimensionError("spatial encoder input resolution too small for its depth");
    res /= 2;
  }
  proj_w_ = params.add(group + ".proj.w", group, num::uniform_fan_in({cin, cfg_.spatial_dim}, cin, rng));
  proj_b_ = params.add(group + ".proj.b", group, Tensor::zeros({cfg_.spatial_dim}));
}

Tensor SpatialEncoder::encode(const Tensor& frames) const {
  if (frames.rank() != 4 || frames.dim(1) != 3 || frames.dim(2) != input_res_ || frames.dim(3) != input_res_) {
    throw DimensionError("spatial encoder expects [N, 3, " + std::to_string(input_res_) + ", " +
                         std::to_string(input_res_) + "], got " + num::shape_string(frames.shape()));
  }
  Tensor x = frames;
  for (const auto& b : blocks_) {
    x = num::conv2d(x, b.w, b.b);
    x = num::channel_norm(x, b.gamma, b.beta, cfg_.norm_eps);
    x = num::gelu(x);
    x = num::avg_pool2d(x);
  }
  const std::size_t n = x.dim(0), c = x.dim(1);
  x = num::mean_axis(num::reshape(x, {n, c, x.dim(2) * x.dim(3)}), 2);
  return num::affine(x, proj_w_, proj_b_);
}

TemporalEncoder::TemporalEncoder(const EncoderConfig& cfg, std::size_t input_res, num::ParameterSet& params,
                                 num::Rng& rng, const std::string& group)
    : cfg_(cfg), input_res_(input_res) {
  cfg_.validate();
  std::size_t cin = 3, res = input_res, frames = cfg_.clip_frames;
  const std::size_t k = cfg_.kernel, kt = cfg_.temporal_kernel;
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    const std::size_t cout = cfg_.channels[i];
    const std::string prefix = group + ".block" + std::to_string(i) + ".";
    Block b;
    b.spatial_w = params.add(prefix + "spatial.w", group, num::uniform_fan_in({cout, cin, k, k}, cin * k * k, rng));
    b.spatial_b = params.add(prefix + "spatial.b", group, Tensor::zeros({cout}));
    b.spatial_gamma = params.add(prefix + "spatial_norm.gamma", group, Tensor::full({cout}, 1.0));
    b.spatial_beta = params.add(prefix + "spatial_norm.beta", group, Tensor::zeros({cout}));
    b.temporal_w = params.add(prefix + "temporal.w", group, num::uniform_fan_in({cout, cout, kt}, cout * kt, rng));
    b.temporal_b = params.add(prefix + "temporal.b", group, Tensor::zeros({cout}));
    b.temporal_gamma = params.add(prefix + "temporal_norm.gamma", group, Tensor::full({cout}, 1.0));
    b.temporal_beta = params.add(prefix + "temporal_norm.beta", group, Tensor::zeros({cout}));
    blocks_.push_back(b);
    cin = cout;
    if (i + 1 < cfg_.channels.size()) {
      if (res < 2 || frames < 2) throw DimensionError("temporal encoder input too small for its depth");
      res /= 2;
      frames /= 2;
    }
  }
  proj_w_ = params.add(group + ".proj.w", group, num::uniform_fan_in({cin, cfg_.temporal_dim}, cin, rng));
  proj_b_ = params.add(group + ".proj.b", group, Tensor::zeros({cfg_.temporal_dim}));
}

Tensor TemporalEncoder::encode(const Tensor& clips) const {
  if (clips.rank() != 5) {
    throw ContractError("temporal encoder expects [N, T, 3, H, W], got " + num::shape_string(clips.shape()));
  }
  if (clips.dim(1) != cfg_.clip_frames) {
    throw ContractError("temporal encoder expects clips of " + std::to_string(cfg_.clip_frames) + " frames, got " +
                        std::to_string(clips.dim(1)));
  }
  if (clips.dim(2) != 3 || clips.dim(3) != input_res_ || clips.dim(4) != input_res_) {
    throw DimensionError("temporal encoder expects frames of [3, " + std::to_string(input_res_) + ", " +
                         std::to_string(input_res_) + "], got " + num::shape_string(clips.shape()));
  }
  const std::size_t n = clips.dim(0);
  Tensor x = clips;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::size_t t = x.dim(1), c = x.dim(2), h = x.dim(3), w = x.dim(4);
    Tensor frames = num::reshape(x, {n * t, c, h, w});
    frames = num::conv2d(frames, b.spatial_w, b.spatial_b);
    frames = num::gelu(num::channel_norm(frames, b.spatial_gamma, b.spatial_beta, cfg_.norm_eps));
    const std::size_t co = frames.dim(1);
    x = num::conv_time(num::reshape(frames, {n, t, co, h, w}), b.temporal_w, b.temporal_b);
    frames = num::reshape(x, {n * t, co, h, w});
    frames = num::gelu(num::channel_norm(frames, b.temporal_gamma, b.temporal_beta, cfg_.norm_eps));
    if (i + 1 < blocks_.size()) {
      frames = num::avg_pool2d(frames);
      x = num::avg_pool_time(num::reshape(frames, {n, t, co, frames.dim(2), frames.dim(3)}));
    } else {
      x = num::reshape(frames, {n, t, co, h, w});
    }
  }
  const std::size_t t = x.dim(1), c = x.dim(2), points = x.dim(3) * x.dim(4);
  Tensor pooled = num::mean_axis(num::reshape(x, {n * t, c, points}), 2);  // [N*T, C]
  pooled = num::mean_axis(num::reshape(pooled, {n, t, c}), 1);              // [N, C]
  return num::affine(pooled, proj_w_, proj_b_);
}

std::size_t TemporalEncoder::temporal_receptive_field(const EncoderConfig& cfg) {
  std::size_t field = 1, stride = 1;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    field += (cfg.temporal_kernel - 1) * stride;
    if (i + 1 < cfg.channels.size()) {
      field += stride;  // pairwise pooling
      stride *= 2;
    }
  }
  return field;
}

}  // namespace stan::enc
