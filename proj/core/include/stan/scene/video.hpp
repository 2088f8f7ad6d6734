#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stan/scene/image.hpp"

namespace stan::scene {

struct FrameSequence {
  std::string video_id;
  double frame_rate = 25.0;
  std::vector<RgbImage> frames;

  // Throws ContractError unless there is at least one frame and all frames
  // share the same dimensions.
  void validate() const;
};

// Single images. PNG is read/written through libpng; PPM is binary P6.
RgbImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// Frame directory: every *.png / *.ppm file in lexicographic filename order.
// The directory name becomes the video id.
FrameSequence read_frame_directory(const std::filesystem::path& dir);
void write_frame_directory(const std::filesystem::path& dir, const FrameSequence& video);

// Raw stream: "STANVID1", u32-LE height, u32-LE width, u32-LE n_frames, then
// n_frames * height * width * 3 bytes of interleaved RGB.
FrameSequence read_raw_stream(const std::filesystem::path& path, std::string video_id);
void write_raw_stream(const std::filesystem::path& path, const FrameSequence& video);

}  // namespace stan::scene
