#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace stan::scene {

// 8-bit RGB frame, channels interleaved, rows top to bottom.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), pixels(h * w * 3, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }

  bool operator==(const RgbImage&) const = default;
};

// Mean over all pixels and channels, scaled to [0, 1].
double mean_intensity(const RgbImage& frame);

// Bilinear resize with corner-aligned sampling: output pixel (y, x) samples
// the source at (y * (H_in - 1) / (H_out - 1), x * (W_in - 1) / (W_out - 1)).
// Results are rounded half up to 8 bits.
RgbImage resize_bilinear(const RgbImage& src, std::size_t out_height, std::size_t out_width);

}  // namespace stan::scene
