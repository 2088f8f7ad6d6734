#include <benchmark/benchmark.h>

#include <random>

#include "stan/encoders/conv_encoders.hpp"
#include "stan/numerics/tape.hpp"

using namespace stan;
using num::Tensor;

namespace {

Tensor random_frames(num::Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t total = 1;
  for (auto d : shape) total *= d;
  std::vector<double> v(total);
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

// Arg: input resolution. Eight scenes per call.
static void BM_SpatialEncoder(benchmark::State& state) {
  const auto res = static_cast<std::size_t>(state.range(0));
  num::ParameterSet params;
  num::Rng rng(1);
  const enc::SpatialEncoder encoder(enc::EncoderConfig{}, res, params, rng);
  const Tensor frames = random_frames({8, 3, res, res}, 2);
  num::NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(encoder.encode(frames));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_SpatialEncoder)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_TemporalEncoder(benchmark::State& state) {
  const auto res = static_cast<std::size_t>(state.range(0));
  num::ParameterSet params;
  num::Rng rng(3);
  enc::EncoderConfig cfg;
  const enc::TemporalEncoder encoder(cfg, res, params, rng);
  const Tensor clips = random_frames({8, cfg.clip_frames, 3, res, res}, 4);
  num::NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(encoder.encode(clips));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_TemporalEncoder)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
