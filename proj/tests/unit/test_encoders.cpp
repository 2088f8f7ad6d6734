#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "fd_check.hpp"
#include "stan/encoders/conv_encoders.hpp"
#include "stan/encoders/feature_store.hpp"
#include "stan/errors.hpp"
#include "stan/numerics/ops.hpp"
#include "stan/training/gradcheck.hpp"

using namespace stan;
using namespace stan::enc;
using num::Tensor;
namespace fs = std::filesystem;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.channels = {4, 6};
  cfg.spatial_dim = 5;
  cfg.temporal_dim = 7;
  return cfg;
}

std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

fs::path temp_file(const std::string& name) {
  fs::create_directories(fs::temp_directory_path() / "stan_enc");
  return fs::temp_directory_path() / "stan_enc" / name;
}

}  // namespace

TEST(SpatialEncoder, OutputShapeAndSizeCheck) {
  num::ParameterSet ps;
  num::Rng rng(1);
  SpatialEncoder enc(small_config(), 8, ps, rng);
  const Tensor out = enc.encode(stan::testing::random_tensor({3, 3, 8, 8}, 2, 0.0, 1.0));
  EXPECT_EQ(out.shape(), (num::Shape{3, 5}));
  EXPECT_THROW(enc.encode(Tensor::zeros({1, 3, 6, 6})), DimensionError);
}

TEST(SpatialEncoder, ZeroFrameGivesZeroVector) {
  num::ParameterSet ps;
  num::Rng rng(1);
  SpatialEncoder enc(small_config(), 8, ps, rng);
  const Tensor out = enc.encode(Tensor::zeros({1, 3, 8, 8}));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(SpatialEncoder, DeterministicForSeed) {
  auto run = [] {
    num::ParameterSet ps;
    num::Rng rng(42);
    SpatialEncoder enc(small_config(), 8, ps, rng);
    return to_vec(enc.encode(stan::testing::random_tensor({2, 3, 8, 8}, 3, 0.0, 1.0)));
  };
  EXPECT_EQ(run(), run());
}

TEST(TemporalEncoder, OutputShapeAndClipContract) {
  num::ParameterSet ps;
  num::Rng rng(1);
  TemporalEncoder enc(small_config(), 8, ps, rng);
  EXPECT_EQ(enc.encode(stan::testing::random_tensor({2, 12, 3, 8, 8}, 4, 0.0, 1.0)).shape(), (num::Shape{2, 7}));
  EXPECT_THROW(enc.encode(Tensor::zeros({1, 11, 3, 8, 8})), ContractError);
  EXPECT_THROW(enc.encode(Tensor::zeros({1, 12, 3, 4, 4})), DimensionError);
}

TEST(TemporalEncoder, ReversalChangesOutput) {
  num::ParameterSet ps;
  num::Rng rng(5);
  TemporalEncoder enc(small_config(), 8, ps, rng);
  const Tensor clip = stan::testing::random_tensor({1, 12, 3, 8, 8}, 6, 0.0, 1.0);
  std::vector<double> rev(clip.size());
  const std::size_t frame = 3 * 8 * 8;
  for (std::size_t t = 0; t < 12; ++t)
    std::copy_n(clip.values().begin() + static_cast<std::ptrdiff_t>((11 - t) * frame), frame, rev.begin() + static_cast<std::ptrdiff_t>(t * frame));
  EXPECT_NE(to_vec(enc.encode(clip)), to_vec(enc.encode(Tensor(clip.shape(), rev))));
}

TEST(TemporalEncoder, ReceptiveFieldCoversClip) {
  EXPECT_GE(TemporalEncoder::temporal_receptive_field(EncoderConfig{}), 12u);
  EXPECT_EQ(TemporalEncoder::temporal_receptive_field(EncoderConfig{}), 18u);
}

TEST(Encoders, GradientsMatchFiniteDifferences) {
  num::ParameterSet ps;
  num::Rng rng(7);
  EncoderConfig cfg = small_config();
  SpatialEncoder s(cfg, 8, ps, rng);
  TemporalEncoder t(cfg, 8, ps, rng);
  const Tensor frames = stan::testing::random_tensor({2, 3, 8, 8}, 8, 0.0, 1.0);
  const Tensor clips = stan::testing::random_tensor({1, 12, 3, 8, 8}, 9, 0.0, 1.0);
  const Tensor ws = stan::testing::random_tensor({2, 5}, 10);
  const Tensor wt = stan::testing::random_tensor({1, 7}, 11);
  train::GradcheckOptions opt;
  opt.coords_per_group = 60;
  const auto report = train::check_gradients(ps, [&] {
    return num::add(num::sum(num::mul(s.encode(frames), ws)), num::sum(num::mul(t.encode(clips), wt)));
  }, opt);
  ASSERT_EQ(report.groups.size(), 2u);
  for (const auto& g : report.groups) EXPECT_LT(g.max_rel_error, 1e-4) << g.group << " " << g.worst;
}

TEST(FeatureStore, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-10.f, 10.f);
  FeatureStore store;
  std::vector<float> v(512);
  for (auto& x : v) x = u(rng);
  store.store("vid", 3, v);
  EXPECT_EQ(store.load("vid", 3), v);
  const fs::path p = temp_file("rt.bin");
  store.save(p);
  const FeatureStore back = FeatureStore::read(p);
  const auto loaded = back.load("vid", 3);
  ASSERT_EQ(loaded.size(), v.size());
  EXPECT_EQ(std::memcmp(loaded.data(), v.data(), v.size() * sizeof(float)), 0);
}

TEST(FeatureStore, ErrorsAndOverwrite) {
  FeatureStore store;
  const std::vector<float> a{1.f, 2.f, 3.f};
  store.store("v", 0, a);
  EXPECT_THROW(store.load("v", 1), NotFoundError);
  EXPECT_THROW(store.store("v", 1, std::vector<float>{1.f, 2.f}), ContractError);
  store.store("v", 0, std::vector<float>{4.f, 5.f, 6.f});
  EXPECT_EQ(store.load("v", 0), (std::vector<float>{4.f, 5.f, 6.f}));
  EXPECT_EQ(store.size(), 1u);
  store.store("v", 1, a);
  store.store("v", 3, a);
  EXPECT_EQ(store.scene_count("v"), 2u);
}

TEST(FeatureStore, ReadsIndependentlyWrittenFile) {
  // Byte layout written by hand, as an external exporter would.
  const fs::path p = temp_file("external.bin");
  {
    std::ofstream out(p, std::ios::binary);
    auto u32 = [&](std::uint32_t v) {
      for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    auto u16 = [&](std::uint16_t v) {
      out.put(static_cast<char>(v & 0xff));
      out.put(static_cast<char>(v >> 8));
    };
    auto f32 = [&](float f) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      u32(bits);
    };
    out.write("STANFEA1", 8);
    u32(2);
    u32(2);
    const std::string k0 = "movie_a/0", k1 = "movie_a/1";
    u16(static_cast<std::uint16_t>(k0.size()));
    out.write(k0.data(), static_cast<std::streamsize>(k0.size()));
    f32(0.25f);
    f32(-1.5f);
    u16(static_cast<std::uint16_t>(k1.size()));
    out.write(k1.data(), static_cast<std::streamsize>(k1.size()));
    f32(3.0f);
    f32(1e-30f);
  }
  const FeatureStore s = FeatureStore::read(p);
  EXPECT_EQ(s.dim(), 2u);
  EXPECT_EQ(s.load("movie_a", 0), (std::vector<float>{0.25f, -1.5f}));
  EXPECT_EQ(s.load("movie_a", 1), (std::vector<float>{3.0f, 1e-30f}));
  // Saving again reproduces the same bytes.
  const fs::path again = temp_file("external_again.bin");
  s.save(again);
  std::ifstream a(p, std::ios::binary), b(again, std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)), {}), bb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(ba, bb);
}

TEST(FeatureStore, RejectsWrongMagic) {
  const fs::path p = temp_file("bad.bin");
  std::ofstream(p, std::ios::binary) << "NOTAFEAT";
  EXPECT_THROW(FeatureStore::read(p), FormatError);
}

TEST(FeatureBank, PrefixPaths) {
  EXPECT_EQ(FeatureBank::path_for("out/feats", Stream::spatial).string(), "out/feats.spatial.bin");
  EXPECT_EQ(FeatureBank::path_for("out/feats", Stream::temporal).string(), "out/feats.temporal.bin");
  FeatureBank bank;
  bank.store("v", 0, Stream::spatial, std::vector<float>{1.f});
  bank.store("v", 0, Stream::temporal, std::vector<float>{2.f, 3.f});
  const fs::path prefix = temp_file("bank");
  bank.save(prefix);
  const FeatureBank back = FeatureBank::read(prefix);
  EXPECT_EQ(back.load("v", 0, Stream::temporal), (std::vector<float>{2.f, 3.f}));
}
