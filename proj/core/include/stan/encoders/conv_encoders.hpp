#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stan/numerics/parameters.hpp"
#include "stan/numerics/tensor.hpp"
#include "stan/scene/image.hpp"

namespace stan::enc {

struct EncoderConfig {
  std::vector<std::size_t> channels{16, 32, 64};
  std::size_t kernel = 3;
  std::size_t temporal_kernel = 3;
  std::size_t spatial_dim = 64;   // d_s
  std::size_t temporal_dim = 64;  // d_t
  std::size_t clip_frames = 12;
  double norm_eps = 1e-5;

  void validate() const;
};

// [3, H, W] tensor with values / 255.
num::Tensor image_to_tensor(const scene::RgbImage& image);
// [N, 3, H, W]
num::Tensor images_to_tensor(std::span<const scene::RgbImage> images);
// [N, T, 3, H, W] from N clips of T frames each.
num::Tensor clips_to_tensor(std::span<const std::vector<scene::RgbImage>> clips);

// 2-D frame encoder h(.): per block conv -> channel norm -> GELU -> 2x2 average
// pool, then global average pooling and an affine projection to d_s.
class SpatialEncoder {
 public:
  SpatialEncoder(const EncoderConfig& cfg, std::size_t input_res, num::ParameterSet& params, num::Rng& rng,
                 const std::string& group = "spatial_encoder");

  // frames: [N, 3, res, res] -> [N, d_s]
  num::Tensor encode(const num::Tensor& frames) const;
  std::size_t input_res() const { return input_res_; }
  std::size_t output_dim() const { return cfg_.spatial_dim; }

 private:
  struct Block {
    num::Tensor w, b, gamma, beta;
  };
  EncoderConfig cfg_;
  std::size_t input_res_;
  std::vector<Block> blocks_;
  num::Tensor proj_w_, proj_b_;
};

// Factorized (2+1)-D clip encoder g(.). Each block runs a per-frame spatial
// convolution, channel norm and GELU, then a temporal convolution across
// frames with its own channel norm and GELU. Every block except the last is
// followed by 2x2 spatial and 2x temporal average pooling. The clip is
// finally averaged over time and space and projected to d_t.
class TemporalEncoder {
 public:
  TemporalEncoder(const EncoderConfig& cfg, std::size_t input_res, num::ParameterSet& params, num::Rng& rng,
                  const std::string& group = "temporal_encoder");

  // clips: [N, clip_frames, 3, res, res] -> [N, d_t]
  num::Tensor encode(const num::Tensor& clips) const;
  std::size_t input_res() const { return input_res_; }
  std::size_t output_dim() const { return cfg_.temporal_dim; }

  // Number of input frames that can influence one position of the last
  // temporal convolution output.
  static std::size_t temporal_receptive_field(const EncoderConfig& cfg);

 private:
  struct Block {
    num::Tensor spatial_w, spatial_b, spatial_gamma, spatial_beta;
    num::Tensor temporal_w, temporal_b, temporal_gamma, temporal_beta;
  };
  EncoderConfig cfg_;
  std::size_t input_res_;
  std::vector<Block> blocks_;
  num::Tensor proj_w_, proj_b_;
};

}  // namespace stan::enc
