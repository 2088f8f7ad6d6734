#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stan/encoders/feature_store.hpp"
#include "stan/model/network.hpp"

namespace stan::train {

enum class SourceKind { frames_dir, raw, features };

// One manifest line: {"video_id": ..., "source": {"frames_dir"|"raw"|"features": path}, "labels": [...]}.
// Relative paths are resolved against the manifest's directory.
struct ManifestEntry {
  std::string video_id;
  SourceKind kind = SourceKind::frames_dir;
  std::filesystem::path path;
  std::vector<std::string> labels;
};

struct Manifest {
  std::filesystem::path file;
  std::vector<ManifestEntry> entries;
  // "file:line: reason" for lines that could not be parsed.
  std::vector<std::string> bad_lines;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// Class order, stored as a JSON array of names.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> names);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::optional<std::size_t> index_of(const std::string& name) const;

  static LabelVocabulary read(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
};

// <manifest dir>/labels.json
std::filesystem::path default_vocabulary_path(const std::filesystem::path& manifest);

// Seeded subset of n entries kept in manifest order; the whole manifest when
// n is 0 or not smaller than its size.
Manifest subsample(const Manifest& manifest, std::size_t n, std::uint64_t seed);

// Decodes the frames of a frames_dir or raw entry.
scene::FrameSequence read_entry_video(const ManifestEntry& entry);

struct Sample {
  std::string video_id;
  model::SampleInput input;
  std::vector<double> targets;  // multi-hot over the vocabulary
};

struct LoadOptions {
  // Store prefix used for every entry instead of decoding frames.
  std::optional<std::filesystem::path> feature_prefix;
  // Fraction of unreadable entries above which loading aborts.
  double max_skip_fraction = 0.10;
  std::size_t workers = 1;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;
  // "video_id: reason" for every skipped entry.
  std::vector<std::string> skipped;

  std::size_t size() const { return samples.size(); }
};

// Decodes and segments every entry (or looks up its features). Unreadable
// entries are skipped and listed; throws FormatError when more than
// max_skip_fraction of the manifest is unreadable.
Dataset load_dataset(const Manifest& manifest, const LabelVocabulary& vocab, const model::NetworkConfig& cfg,
                     const LoadOptions& options = {});

// Sample input with its scenes reordered: new scene k is old scene order[k].
model::SampleInput permute_scenes(const model::SampleInput& input, const std::vector<std::size_t>& order);

// Seeded Fisher-Yates permutation of 0..n-1 driven by raw generator output.
std::vector<std::size_t> seeded_permutation(std::size_t n, num::Rng& rng);

}  // namespace stan::train
