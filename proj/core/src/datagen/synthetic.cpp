#include "stan/datagen/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <thread>

#include "stan/errors.hpp"
#include "stan/numerics/parameters.hpp"
#include "stan/training/dataset.hpp"

namespace stan::datagen {

namespace fs = std::filesystem;

namespace {

enum Class : std::size_t {
  kMoveRight = 0,
  kMoveLeft,
  kGreenFirst,
  kGreenLast,
  kMoveDown,
  kMoveUp,
  kBlueFirst,
  kBlueLast,
  kClassCount
};

const char* const kNames[kClassCount] = {"move_right", "move_left", "green_first", "green_last",
                                         "move_down",  "move_up",   "blue_first",  "blue_last"};

std::size_t draw(num::Rng& rng, std::size_t lo, std::size_t hi) {  // inclusive
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

struct SceneDraw {
  std::size_t length = 0;
  std::size_t x0 = 0;  // top-left at the first frame of forward motion
  std::size_t y0 = 0;
};

bool conflicts(std::size_t a, std::size_t b) {
  auto pair = [&](std::size_t x, std::size_t y) { return (a == x && b == y) || (a == y && b == x); };
  return pair(kMoveRight, kMoveLeft) || pair(kMoveDown, kMoveUp) || pair(kGreenFirst, kBlueFirst) ||
         pair(kGreenLast, kBlueLast);
}

std::uint8_t level(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

void SyntheticSpec::validate() const {
  if (n_classes < 2 || n_classes > kClassCount) throw ContractError("n_classes must lie in [2, 8]");
  if (min_scenes < 2 || max_scenes < min_scenes) throw ContractError("scene count range is invalid (need >= 2 scenes)");
  if (min_scene_len < 1 || max_scene_len < min_scene_len) throw ContractError("scene length range is invalid");
  if (min_scene_len % 2 == 0 && min_scene_len == max_scene_len) throw ContractError("scene length range holds no odd length");
  if (block_size == 0 || block_size >= resolution) throw ContractError("block must fit inside the frame");
  if (speed * (max_scene_len - 1) + block_size > resolution) throw ContractError("motion range exceeds the frame");
  if (std::abs(bright_level - dark_level) < 0.2) throw ContractError("background levels too close for cut detection");
  if (max_labels == 0) throw ContractError("max_labels must be >= 1");
}

std::vector<std::string> class_names(const SyntheticSpec& spec) {
  spec.validate();
  return std::vector<std::string>(kNames, kNames + spec.n_classes);
}

SyntheticVideo generate_video(const SyntheticSpec& spec, std::span<const std::size_t> classes, std::uint64_t seed,
                              const std::string& video_id) {
  spec.validate();
  if (classes.empty()) throw ContractError("generate_video: empty class set");
  std::vector<bool> has(kClassCount, false);
  for (auto c : classes) {
    if (c >= spec.n_classes) throw ContractError("class " + std::to_string(c) + " is outside the spec");
    for (std::size_t o = 0; o < kClassCount; ++o) {
      if (has[o] && conflicts(o, c)) throw ContractError(std::string("conflicting classes ") + kNames[o] + " and " + kNames[c]);
    }
    has[c] = true;
  }

  // Every draw happens here, independent of the class set.
  num::Rng rng(seed);
  const std::size_t n_scenes = draw(rng, spec.min_scenes, spec.max_scenes);
  const bool start_bright = (rng() & 1u) != 0;
  const std::size_t lo_len = spec.min_scene_len | 1u;
  const std::size_t hi_len = spec.max_scene_len % 2 == 1 ? spec.max_scene_len : spec.max_scene_len - 1;
  std::vector<SceneDraw> draws(n_scenes);
  for (auto& d : draws) {
    d.length = lo_len + 2 * draw(rng, 0, (hi_len - lo_len) / 2);
    const std::size_t travel = spec.speed * (d.length - 1);
    d.x0 = draw(rng, 0, spec.resolution - spec.block_size - travel);
    d.y0 = draw(rng, 0, spec.resolution - spec.block_size - travel);
  }

  SyntheticVideo out;
  out.video.video_id = video_id;
  out.labels.assign(spec.n_classes, 0);
  for (auto c : classes) out.labels[c] = 1;

  const std::size_t res = spec.resolution;
  std::size_t start = 0;
  for (std::size_t k = 0; k < n_scenes; ++k) {
    const SceneDraw& d = draws[k];
    const bool bright = ((k % 2 == 0) == start_bright);
    const std::uint8_t bg = level(bright ? spec.bright_level : spec.dark_level);

    std::uint8_t color[3] = {255, 255, 255};
    if ((k == 0 && has[kGreenFirst]) || (k + 1 == n_scenes && has[kGreenLast])) {
      color[0] = 0;
      color[2] = 0;
    }
    if ((k == 0 && has[kBlueFirst]) || (k + 1 == n_scenes && has[kBlueLast])) {
      color[0] = 0;
      color[1] = 0;
    }
    if (spec.appearance_confound) {
      if (has[kMoveRight] || has[kMoveDown]) color[2] = 160;
      if (has[kMoveLeft] || has[kMoveUp]) color[0] = 160;
    }

    const std::size_t center = d.length / 2;
    for (std::size_t f = 0; f < d.length; ++f) {
      // Forward time for right/down, reversed time for left/up, frozen at the
      // center frame otherwise.
      std::size_t tx = center, ty = center;
      if (has[kMoveRight]) tx = f;
      if (has[kMoveLeft]) tx = d.length - 1 - f;
      if (has[kMoveDown]) ty = f;
      if (has[kMoveUp]) ty = d.length - 1 - f;
      const std::size_t bx = d.x0 + spec.speed * tx;
      const std::size_t by = d.y0 + spec.speed * ty;

      scene::RgbImage img(res, res, bg);
      for (std::size_t y = by; y < by + spec.block_size; ++y) {
        for (std::size_t x = bx; x < bx + spec.block_size; ++x) {
          for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
        }
      }
      out.video.frames.push_back(std::move(img));
    }
    out.scenes.push_back({start, start + d.length});
    start += d.length;
  }
  return out;
}

std::uint64_t sample_seed(std::uint64_t seed, const std::string& split, std::size_t index) {
  std::uint64_t h = 1469598103934665603ull;
  for (char ch : split) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

fs::path generate_dataset(const SyntheticSpec& spec, std::size_t n_samples, std::uint64_t seed, const fs::path& out_dir,
                          const std::string& split, std::size_t workers) {
  spec.validate();
  const auto names = class_names(spec);
  fs::create_directories(out_dir / "videos");

  std::vector<train::ManifestEntry> entries(n_samples);
  auto make = [&](std::size_t i) {
    const std::uint64_t s = sample_seed(seed, split, i);
    std::vector<std::size_t> classes{i % spec.n_classes};
    if (spec.max_labels > 1) {
      // Extra labels from a separate stream so the video draws stay untouched.
      num::Rng extra(s ^ 0xa5a5a5a5a5a5a5a5ull);
      const std::size_t want = static_cast<std::size_t>(extra() % spec.max_labels);
      for (std::size_t attempt = 0; attempt < 4 * spec.n_classes && classes.size() < 1 + want; ++attempt) {
        const std::size_t c = static_cast<std::size_t>(extra() % spec.n_classes);
        bool ok = true;
        for (auto o : classes) ok = ok && o != c && !conflicts(o, c);
        if (ok) classes.push_back(c);
      }
      std::sort(classes.begin(), classes.end());
    }
    char id[64];
    std::snprintf(id, sizeof id, "%s_%06zu", split.c_str(), i);
    const SyntheticVideo v = generate_video(spec, classes, s, id);
    const fs::path dir = out_dir / "videos" / id;
    fs::remove_all(dir);
    scene::write_frame_directory(dir, v.video);
    train::ManifestEntry& e = entries[i];
    e.video_id = id;
    e.kind = train::SourceKind::frames_dir;
    e.path = fs::path("videos") / id;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
      if (v.labels[c]) e.labels.push_back(names[c]);
    }
  };

  workers = std::max<std::size_t>(1, std::min(workers, n_samples));
  if (workers == 1) {
    for (std::size_t i = 0; i < n_samples; ++i) make(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n_samples; i = next++) make(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n_samples;
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  const fs::path manifest = out_dir / (split + ".jsonl");
  train::write_manifest(manifest, entries);
  train::LabelVocabulary(names).save(out_dir / "labels.json");
  return manifest;
}

}  // namespace stan::datagen
