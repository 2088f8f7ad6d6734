#include "stan/scene/segmentation.hpp"

#include <cmath>
#include <deque>
#include <string>

#include "stan/errors.hpp"

namespace stan::scene {

void CutDetectorConfig::validate() const {
  if (window < 1) throw ContractError("cut detector window must be >= 1");
  if (!(threshold > 0)) throw ContractError("cut detector threshold must be > 0");
}

void SamplingConfig::validate() const {
  if (frames_per_scene < 1) throw ContractError("frames_per_scene must be >= 1");
  if (low_res < 1 || high_res < 1) throw ContractError("sampling resolutions must be positive");
}

std::vector<SceneBoundary> detect_scenes(const std::vector<double>& intensities, const CutDetectorConfig& cfg) {
  cfg.validate();
  if (intensities.empty()) throw ContractError("detect_scenes: empty video");
  std::vector<SceneBoundary> scenes;
  std::deque<double> history;
  std::size_t start = 0;
  for (std::size_t i = 0; i < intensities.size(); ++i) {
    const double v = intensities[i];
    if (!history.empty()) {
      double total = 0.0;
      for (double h : history) total += h;
      const double running_mean = total / static_cast<double>(history.size());
      if (std::abs(v - running_mean) > cfg.threshold && i - start >= cfg.min_scene_len) {
        scenes.push_back({start, i});
        start = i;
        history.clear();
      }
    }
    history.push_back(v);
    if (history.size() > cfg.window) history.pop_front();
  }
  scenes.push_back({start, intensities.size()});
  return scenes;
}

std::vector<SceneBoundary> detect_scenes(const FrameSequence& video, const CutDetectorConfig& cfg) {
  video.validate();
  std::vector<double> intensities;
  intensities.reserve(video.frames.size());
  for (const auto& f : video.frames) {
    if (cfg.analysis_res == 0) {
      intensities.push_back(mean_intensity(f));
    } else {
      intensities.push_back(mean_intensity(resize_bilinear(f, cfg.analysis_res, cfg.analysis_res)));
    }
  }
  return detect_scenes(intensities, cfg);
}

std::vector<std::size_t> uniform_sample_offsets(std::size_t scene_length, std::size_t count) {
  if (scene_length == 0 || count == 0) throw ContractError("uniform_sample_offsets: empty scene or count");
  std::vector<std::size_t> offsets(count, 0);
  if (count == 1) return offsets;
  // round_half_up(j * (L-1) / (count-1)) in exact integer arithmetic.
  const std::size_t span = scene_length - 1, denom = count - 1;
  for (std::size_t j = 0; j < count; ++j) offsets[j] = (2 * j * span + denom) / (2 * denom);
  return offsets;
}

SceneSegment sample_scene(const FrameSequence& video, std::size_t start, std::size_t end, const SamplingConfig& cfg) {
  cfg.validate();
  if (end <= start || end > video.frames.size()) {
    throw ContractError("sample_scene: invalid range [" + std::to_string(start) + ", " + std::to_string(end) + ")");
  }
  SceneSegment seg;
  seg.start_idx = start;
  seg.end_idx = end;
  const std::size_t length = end - start;
  for (std::size_t off : uniform_sample_offsets(length, cfg.frames_per_scene)) {
    seg.clip_indices.push_back(start + off);
    seg.clip.push_back(resize_bilinear(video.frames[start + off], cfg.low_res, cfg.low_res));
  }
  seg.center_index = start + length / 2;
  seg.center_frame = resize_bilinear(video.frames[seg.center_index], cfg.high_res, cfg.high_res);
  return seg;
}

std::vector<SceneSegment> segment_video(const FrameSequence& video, const PipelineConfig& cfg) {
  std::vector<SceneSegment> out;
  std::size_t index = 0;
  for (const auto& b : detect_scenes(video, cfg.detector)) {
    out.push_back(sample_scene(video, b.start, b.end, cfg.sampling));
    out.back().scene_index = index++;
  }
  return out;
}

}  // namespace stan::scene
