#include "stan/encoders/feature_store.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "stan/errors.hpp"

namespace stan::enc {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'A', 'N', 'F', 'E', 'A', '1'};

void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw FormatError("truncated feature store");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

std::string_view stream_name(Stream s) { return s == Stream::spatial ? "spatial" : "temporal"; }

std::string FeatureStore::key(std::string_view video_id, std::size_t scene_index) {
  return std::string(video_id) + "/" + std::to_string(scene_index);
}

void FeatureStore::store(std::string_view video_id, std::size_t scene_index, std::span<const float> vec) {
  if (vec.empty()) throw ContractError("feature vectors must be non-empty");
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw ContractError("feature dimension " + std::to_string(vec.size()) + " does not match store dimension " +
                        std::to_string(dim_));
  }
  auto k = key(video_id, scene_index);
  if (k.size() > 0xffff) throw ContractError("feature key too long");
  auto [it, inserted] = records_.try_emplace(k, vec.begin(), vec.end());
  if (inserted) {
    keys_.push_back(std::move(k));
  } else {
    it->second.assign(vec.begin(), vec.end());
  }
}

std::vector<float> FeatureStore::load(std::string_view video_id, std::size_t scene_index) const {
  auto it = records_.find(key(video_id, scene_index));
  if (it == records_.end()) throw NotFoundError("no features for " + key(video_id, scene_index));
  return it->second;
}

bool FeatureStore::contains(std::string_view video_id, std::size_t scene_index) const {
  return records_.count(key(video_id, scene_index)) != 0;
}

std::size_t FeatureStore::scene_count(std::string_view video_id) const {
  std::size_t n = 0;
  while (contains(video_id, n)) ++n;
  return n;
}

void FeatureStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kMagic, 8);
  put_le(out, dim_, 4);
  put_le(out, keys_.size(), 4);
  for (const auto& k : keys_) {
    put_le(out, k.size(), 2);
    out.write(k.data(), static_cast<std::streamsize>(k.size()));
    for (float f : records_.at(k)) put_le(out, std::bit_cast<std::uint32_t>(f), 4);
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

FeatureStore FeatureStore::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError(path.string() + " is not a STANFEA1 feature store");
  }
  FeatureStore store(get_le(in, 4));
  const auto count = get_le(in, 4);
  std::vector<float> vec(store.dim_);
  for (std::uint64_t r = 0; r < count; ++r) {
    std::string k(get_le(in, 2), '\0');
    if (!in.read(k.data(), static_cast<std::streamsize>(k.size()))) throw FormatError("truncated feature store");
    for (auto& f : vec) f = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(in, 4)));
    const auto slash = k.rfind('/');
    if (slash == std::string::npos) throw FormatError("malformed feature key '" + k + "'");
    std::size_t scene = 0;
    try {
      scene = std::stoul(k.substr(slash + 1));
    } catch (const std::exception&) {
      throw FormatError("malformed feature key '" + k + "'");
    }
    store.store(std::string_view(k).substr(0, slash), scene, vec);
  }
  return store;
}

std::filesystem::path FeatureBank::path_for(const std::filesystem::path& prefix, Stream s) {
  return prefix.string() + "." + std::string(stream_name(s)) + ".bin";
}

void FeatureBank::save(const std::filesystem::path& prefix) const {
  spatial.save(path_for(prefix, Stream::spatial));
  temporal.save(path_for(prefix, Stream::temporal));
}

FeatureBank FeatureBank::read(const std::filesystem::path& prefix) {
  return FeatureBank{FeatureStore::read(path_for(prefix, Stream::spatial)),
                     FeatureStore::read(path_for(prefix, Stream::temporal))};
}

}  // namespace stan::enc
