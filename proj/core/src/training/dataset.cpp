#include "stan/training/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "stan/errors.hpp"
#include "stan/scene/video.hpp"

namespace stan::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kind_key(SourceKind k) {
  switch (k) {
    case SourceKind::frames_dir: return "frames_dir";
    case SourceKind::raw: return "raw";
    case SourceKind::features: return "features";
  }
  return "frames_dir";
}

ManifestEntry parse_entry(const std::string& line, const fs::path& base) {
  const json j = json::parse(line);
  ManifestEntry e;
  e.video_id = j.at("video_id").get<std::string>();
  const json& src = j.at("source");
  if (!src.is_object() || src.size() != 1) throw FormatError("source must hold exactly one of frames_dir/raw/features");
  const std::string key = src.begin().key();
  if (key == "frames_dir") e.kind = SourceKind::frames_dir;
  else if (key == "raw") e.kind = SourceKind::raw;
  else if (key == "features") e.kind = SourceKind::features;
  else throw FormatError("unknown source kind '" + key + "'");
  fs::path p = src.begin().value().get<std::string>();
  e.path = p.is_absolute() ? p : base / p;
  for (const auto& l : j.at("labels")) e.labels.push_back(l.get<std::string>());
  return e;
}

}  // namespace

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open manifest " + path.string());
  Manifest m;
  m.file = path;
  const fs::path base = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.entries.push_back(parse_entry(line, base));
    } catch (const std::exception& e) {
      m.bad_lines.push_back(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  const fs::path base = path.parent_path();
  for (const auto& e : entries) {
    fs::path p = e.path;
    if (p.is_absolute() && !base.empty()) {
      const fs::path rel = p.lexically_relative(fs::absolute(base));
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    json j{{"video_id", e.video_id}, {"source", {{kind_key(e.kind), p.generic_string()}}}, {"labels", e.labels}};
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("failed writing manifest " + path.string());
}

LabelVocabulary::LabelVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], i).second) throw FormatError("duplicate class name '" + names_[i] + "'");
  }
}

std::optional<std::size_t> LabelVocabulary::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LabelVocabulary LabelVocabulary::read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open label vocabulary " + path.string());
  try {
    return LabelVocabulary(json::parse(in).get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw FormatError("malformed label vocabulary " + path.string() + ": " + e.what());
  }
}

void LabelVocabulary::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json(names_).dump() << "\n";
}

fs::path default_vocabulary_path(const fs::path& manifest) { return manifest.parent_path() / "labels.json"; }

std::vector<std::size_t> seeded_permutation(std::size_t n, num::Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

Manifest subsample(const Manifest& manifest, std::size_t n, std::uint64_t seed) {
  if (n == 0 || n >= manifest.entries.size()) return manifest;
  num::Rng rng(seed);
  auto perm = seeded_permutation(manifest.entries.size(), rng);
  perm.resize(n);
  std::sort(perm.begin(), perm.end());
  Manifest out;
  out.file = manifest.file;
  out.bad_lines = manifest.bad_lines;
  for (auto i : perm) out.entries.push_back(manifest.entries[i]);
  return out;
}

model::SampleInput permute_scenes(const model::SampleInput& input, const std::vector<std::size_t>& order) {
  const std::size_t n = input.scene_count();
  if (order.size() != n) throw DimensionError("scene permutation has wrong length");
  model::SampleInput out;
  if (!input.scenes.empty()) {
    for (std::size_t k = 0; k < n; ++k) {
      out.scenes.push_back(input.scenes.at(order[k]));
      out.scenes.back().scene_index = k;
    }
  }
  auto permute_rows = [&](const num::Tensor& t) {
    const std::size_t d = t.dim(1);
    std::vector<double> v(t.size());
    for (std::size_t k = 0; k < n; ++k) {
      std::copy_n(t.values().begin() + static_cast<std::ptrdiff_t>(order[k] * d), d, v.begin() + static_cast<std::ptrdiff_t>(k * d));
    }
    return num::Tensor(t.shape(), std::move(v));
  };
  if (input.spatial_features) out.spatial_features = permute_rows(*input.spatial_features);
  if (input.temporal_features) out.temporal_features = permute_rows(*input.temporal_features);
  return out;
}

namespace {

num::Tensor features_from_store(const enc::FeatureStore& store, const std::string& video_id, std::size_t n) {
  std::vector<double> v;
  v.reserve(n * store.dim());
  for (std::size_t k = 0; k < n; ++k) {
    const auto f = store.load(video_id, k);
    v.insert(v.end(), f.begin(), f.end());
  }
  return num::Tensor({n, store.dim()}, std::move(v));
}

}  // namespace

scene::FrameSequence read_entry_video(const ManifestEntry& e) {
  scene::FrameSequence video;
  if (e.kind == SourceKind::frames_dir) video = scene::read_frame_directory(e.path);
  else if (e.kind == SourceKind::raw) video = scene::read_raw_stream(e.path, e.video_id);
  else throw FormatError("features source needs feature input (--features)");
  video.video_id = e.video_id;
  return video;
}

Dataset load_dataset(const Manifest& manifest, const LabelVocabulary& vocab, const model::NetworkConfig& cfg,
                     const LoadOptions& options) {
  Dataset ds;
  ds.class_names = vocab.names();
  const bool use_features = options.feature_prefix.has_value() || cfg.input == model::InputKind::features;
  const bool want_s = cfg.model.uses_spatial();
  const bool want_t = cfg.model.uses_temporal();

  // Feature banks are shared between entries that name the same prefix.
  std::map<fs::path, enc::FeatureBank> banks;
  if (use_features) {
    std::vector<fs::path> prefixes;
    if (options.feature_prefix) prefixes.push_back(*options.feature_prefix);
    for (const auto& e : manifest.entries) {
      if (!options.feature_prefix && e.kind == SourceKind::features) prefixes.push_back(e.path);
    }
    for (const auto& p : prefixes) {
      if (banks.count(p)) continue;
      enc::FeatureBank bank;
      if (want_s) bank.spatial = enc::FeatureStore::read(enc::FeatureBank::path_for(p, enc::Stream::spatial));
      if (want_t) bank.temporal = enc::FeatureStore::read(enc::FeatureBank::path_for(p, enc::Stream::temporal));
      banks.emplace(p, std::move(bank));
    }
  }

  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<Sample>> slots(n);
  std::vector<std::string> errors(n);

  auto load_one = [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    try {
      Sample s;
      s.video_id = e.video_id;
      s.targets.assign(vocab.size(), 0.0);
      for (const auto& l : e.labels) {
        const auto idx = vocab.index_of(l);
        if (!idx) throw FormatError("label '" + l + "' is not in the vocabulary");
        s.targets[*idx] = 1.0;
      }
      if (use_features) {
        const fs::path prefix = options.feature_prefix ? *options.feature_prefix : e.path;
        if (!options.feature_prefix && e.kind != SourceKind::features) {
          throw FormatError("entry has no features source");
        }
        const enc::FeatureBank& bank = banks.at(prefix);
        const enc::FeatureStore& ref = want_s ? bank.spatial : bank.temporal;
        const std::size_t scenes = ref.scene_count(e.video_id);
        if (scenes == 0) throw NotFoundError("no features stored for " + e.video_id);
        if (want_s) s.input.spatial_features = features_from_store(bank.spatial, e.video_id, scenes);
        if (want_t) s.input.temporal_features = features_from_store(bank.temporal, e.video_id, scenes);
      } else {
        s.input.scenes = scene::segment_video(read_entry_video(e), cfg.pipeline);
      }
      slots[i] = std::move(s);
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) load_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) load_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  ds.skipped = manifest.bad_lines;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) ds.samples.push_back(std::move(*slots[i]));
    else ds.skipped.push_back(manifest.entries[i].video_id + ": " + errors[i]);
  }
  const std::size_t total = n + manifest.bad_lines.size();
  if (total > 0 && static_cast<double>(ds.skipped.size()) > options.max_skip_fraction * static_cast<double>(total)) {
    throw FormatError(std::to_string(ds.skipped.size()) + " of " + std::to_string(total) + " manifest entries are unreadable (first: " +
                      ds.skipped.front() + ")");
  }
  return ds;
}

}  // namespace stan::train
