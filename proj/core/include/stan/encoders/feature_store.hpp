#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stan::enc {

enum class Stream { spatial, temporal };

std::string_view stream_name(Stream s);

// Per-stream map (video_id, scene_index) -> f32 feature vector. All vectors
// share one dimension, fixed by the first write (or by the constructor).
//
// File layout, little-endian: "STANFEA1", u32 dim, u32 record_count, then per
// record u16 id_len, id bytes "video_id/scene_index", dim x f32. Records are
// written in insertion order.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::size_t dim) : dim_(dim) {}

  void store(std::string_view video_id, std::size_t scene_index, std::span<const float> vec);
  std::vector<float> load(std::string_view video_id, std::size_t scene_index) const;
  bool contains(std::string_view video_id, std::size_t scene_index) const;
  // Number of consecutive scenes 0..k-1 stored for the video.
  std::size_t scene_count(std::string_view video_id) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }

  void save(const std::filesystem::path& path) const;
  static FeatureStore read(const std::filesystem::path& path);

 private:
  static std::string key(std::string_view video_id, std::size_t scene_index);
  std::size_t dim_ = 0;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::vector<float>> records_;
};

// The two per-stream stores behind one prefix: <prefix>.spatial.bin and
// <prefix>.temporal.bin.
struct FeatureBank {
  FeatureStore spatial;
  FeatureStore temporal;

  FeatureStore& operator[](Stream s) { return s == Stream::spatial ? spatial : temporal; }
  const FeatureStore& operator[](Stream s) const { return s == Stream::spatial ? spatial : temporal; }

  void store(std::string_view video_id, std::size_t scene_index, Stream s, std::span<const float> vec) {
    (*this)[s].store(video_id, scene_index, vec);
  }
  std::vector<float> load(std::string_view video_id, std::size_t scene_index, Stream s) const {
    return (*this)[s].load(video_id, scene_index);
  }

  static std::filesystem::path path_for(const std::filesystem::path& prefix, Stream s);
  void save(const std::filesystem::path& prefix) const;
  static FeatureBank read(const std::filesystem::path& prefix);
};

}  // namespace stan::enc
