#include "stan/scene/image.hpp"

#include <algorithm>
#include <cmath>

#include "stan/errors.hpp"

namespace stan::scene {

double mean_intensity(const RgbImage& frame) {
  if (frame.pixels.empty()) throw ContractError("mean_intensity: empty frame");
  std::uint64_t total = 0;
  for (std::uint8_t v : frame.pixels) total += v;
  return static_cast<double>(total) / (255.0 * static_cast<double>(frame.pixels.size()));
}

namespace {
double source_coord(std::size_t out_index, std::size_t out_len, std::size_t in_len) {
  if (out_len <= 1) return 0.0;
  return static_cast<double>(out_index) * static_cast<double>(in_len - 1) / static_cast<double>(out_len - 1);
}
}  // namespace

RgbImage resize_bilinear(const RgbImage& src, std::size_t out_height, std::size_t out_width) {
  if (src.height == 0 || src.width == 0 || out_height == 0 || out_width == 0) {
    throw DimensionError("resize_bilinear: empty source or target");
  }
  if (src.height == out_height && src.width == out_width) return src;
  RgbImage out(out_height, out_width);
  for (std::size_t y = 0; y < out_height; ++y) {
    const double sy = source_coord(y, out_height, src.height);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, src.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_width; ++x) {
      const double sx = source_coord(x, out_width, src.width);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, src.width - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = src.at(y0, x0, c) * (1.0 - fx) + src.at(y0, x1, c) * fx;
        const double bottom = src.at(y1, x0, c) * (1.0 - fx) + src.at(y1, x1, c) * fx;
        const double v = top * (1.0 - fy) + bottom * fy;
        out.at(y, x, c) = static_cast<std::uint8_t>(std::min(255.0, std::floor(v + 0.5)));
      }
    }
  }
  return out;
}

}  // namespace stan::scene
