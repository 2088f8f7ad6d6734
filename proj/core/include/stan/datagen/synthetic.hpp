#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stan/scene/segmentation.hpp"
#include "stan/scene/video.hpp"

namespace stan::datagen {

// Videos of a bright block on a background that flips between two
// brightness levels at every scene cut. Classes, in index order:
//   move_right / move_left   block moves horizontally; the pair are temporal
//                            twins (each scene of one is the other's scene
//                            played backwards)
//   green_first / green_last the block of the first / last scene is green
//   move_down / move_up      vertical twins
//   blue_first / blue_last   the block of the first / last scene is blue
// Videos without a motion class show a static block placed where a moving
// block would sit at the scene's center frame. All random draws are made
// before the classes are applied, so videos with the same seed differ only
// in what their classes change.
struct SyntheticSpec {
  std::size_t n_classes = 4;  // 2..8, a prefix of the class list
  std::size_t min_scenes = 3;
  std::size_t max_scenes = 8;
  // Scene lengths are odd, drawn from [min_scene_len, max_scene_len]; an
  // odd length keeps the center frame fixed under reversal.
  std::size_t min_scene_len = 13;
  std::size_t max_scene_len = 23;
  std::size_t resolution = 64;
  std::size_t block_size = 16;
  std::size_t speed = 2;  // pixels per frame
  double dark_level = 0.1;
  double bright_level = 0.6;
  // Tints the moving block by direction so a single frame reveals the class.
  bool appearance_confound = false;
  // Up to this many labels per video (the first is assigned round-robin).
  std::size_t max_labels = 1;

  void validate() const;
};

std::vector<std::string> class_names(const SyntheticSpec& spec);

struct SyntheticVideo {
  scene::FrameSequence video;
  std::vector<std::uint8_t> labels;            // multi-hot, n_classes
  std::vector<scene::SceneBoundary> scenes;    // ground truth
};

// Throws ContractError for an empty or conflicting class set, or classes
// outside the spec.
SyntheticVideo generate_video(const SyntheticSpec& spec, std::span<const std::size_t> classes, std::uint64_t seed,
                              const std::string& video_id = "video");

// Seed of sample `index` of a split.
std::uint64_t sample_seed(std::uint64_t seed, const std::string& split, std::size_t index);

// Writes out_dir/videos/<id>/%06d.png, out_dir/<split>.jsonl and
// out_dir/labels.json; returns the manifest path.
std::filesystem::path generate_dataset(const SyntheticSpec& spec, std::size_t n_samples, std::uint64_t seed,
                                       const std::filesystem::path& out_dir, const std::string& split = "train",
                                       std::size_t workers = 1);

}  // namespace stan::datagen
