#pragma once

#include <cstddef>
#include <vector>

#include "stan/scene/image.hpp"
#include "stan/scene/video.hpp"

namespace stan::scene {

struct CutDetectorConfig {
  // Number of preceding frames of the current scene in the running mean.
  std::size_t window = 12;
  // Absolute deviation of normalized intensity from the running mean.
  double threshold = 0.08;
  std::size_t min_scene_len = 12;
  // Frames are resized to analysis_res^2 before measuring intensity; 0 keeps
  // the native size.
  std::size_t analysis_res = 64;

  void validate() const;
};

struct SamplingConfig {
  std::size_t frames_per_scene = 12;
  std::size_t low_res = 64;
  std::size_t high_res = 128;

  void validate() const;
};

struct PipelineConfig {
  CutDetectorConfig detector;
  SamplingConfig sampling;
};

// Half-open frame range [start, end).
struct SceneBoundary {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const SceneBoundary&) const = default;
};

struct SceneSegment {
  std::size_t start_idx = 0;
  std::size_t end_idx = 0;
  std::size_t scene_index = 0;
  std::vector<std::size_t> clip_indices;
  std::size_t center_index = 0;
  std::vector<RgbImage> clip;  // frames_per_scene frames at low_res^2
  RgbImage center_frame;       // high_res^2
};

// Scene partition of [0, n_frames). A cut is placed before frame i when
// |intensity(i) - mean of the last `window` frames of the current scene|
// exceeds the threshold and the current scene already has min_scene_len
// frames; the running mean restarts at each cut.
std::vector<SceneBoundary> detect_scenes(const FrameSequence& video, const CutDetectorConfig& cfg);

// Same rule over a precomputed intensity series.
std::vector<SceneBoundary> detect_scenes(const std::vector<double>& intensities, const CutDetectorConfig& cfg);

// Offsets round_half_up(j * (L - 1) / (count - 1)), j = 0..count-1, for a
// scene of L frames. Repeats offsets when L < count.
std::vector<std::size_t> uniform_sample_offsets(std::size_t scene_length, std::size_t count);

SceneSegment sample_scene(const FrameSequence& video, std::size_t start, std::size_t end, const SamplingConfig& cfg);

std::vector<SceneSegment> segment_video(const FrameSequence& video, const PipelineConfig& cfg);

}  // namespace stan::scene
