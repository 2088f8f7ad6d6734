#include <benchmark/benchmark.h>

#include <random>

#include "stan/datagen/synthetic.hpp"
#include "stan/metrics/metrics.hpp"
#include "stan/scene/segmentation.hpp"

using namespace stan;

static void BM_DetectScenes(benchmark::State& state) {
  datagen::SyntheticSpec spec;
  spec.min_scenes = spec.max_scenes = static_cast<std::size_t>(state.range(0));
  const auto v = datagen::generate_video(spec, std::vector<std::size_t>{0}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(scene::detect_scenes(v.video, scene::CutDetectorConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.video.frames.size()));
}
BENCHMARK(BM_DetectScenes)->Arg(3)->Arg(8)->Arg(32);

static void BM_SegmentVideo(benchmark::State& state) {
  const auto v = datagen::generate_video(datagen::SyntheticSpec{}, std::vector<std::size_t>{2}, 2);
  scene::PipelineConfig cfg;
  cfg.sampling.low_res = 16;
  cfg.sampling.high_res = 32;
  for (auto _ : state) benchmark::DoNotOptimize(scene::segment_video(v.video, cfg));
}
BENCHMARK(BM_SegmentVideo)->Unit(benchmark::kMillisecond);

static void BM_AveragePrecision(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    labels[i] = rng() % 4 == 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::average_precision(scores, labels));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AveragePrecision)->RangeMultiplier(8)->Range(64, 32768)->Complexity(benchmark::oNLogN);

static void BM_ComputeReport(benchmark::State& state) {
  metrics::EvalSet set;
  set.n_samples = 1024;
  set.n_classes = 20;
  std::mt19937_64 rng(4);
  for (std::size_t i = 0; i < set.n_samples * set.n_classes; ++i) {
    set.scores.push_back(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    set.labels.push_back(rng() % 5 == 0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::compute_report(set));
}
BENCHMARK(BM_ComputeReport);

BENCHMARK_MAIN();
