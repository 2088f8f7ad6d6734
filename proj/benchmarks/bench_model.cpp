#include <benchmark/benchmark.h>

#include <random>

#include "stan/model/layers.hpp"
#include "stan/model/stan_model.hpp"
#include "stan/numerics/tape.hpp"

using namespace stan;
using num::Tensor;

namespace {

Tensor random_tensor(num::Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::size_t total = 1;
  for (auto d : shape) total *= d;
  std::vector<double> v(total);
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

model::ModelConfig bench_config() {
  model::ModelConfig cfg;
  cfg.d_model = 64;
  cfg.n_heads = 4;
  cfg.ffn_hidden = 256;
  cfg.q_hidden = 64;
  cfg.head_hidden = 64;
  cfg.max_scenes = 128;
  cfg.n_classes = 20;
  return cfg;
}

}  // namespace

static void BM_Attention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor q = random_tensor({n, 64}, 1), k = random_tensor({n, 64}, 2), v = random_tensor({n, 64}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(model::attention(q, k, v));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Attention)->RangeMultiplier(2)->Range(8, 128)->Complexity();

static void BM_EncoderBlock(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  num::ParameterSet params;
  num::Rng rng(4);
  const auto block = model::EncoderBlock::create(64, 256, params, "b", "blocks", rng);
  const Tensor x = random_tensor({n + 1, 64}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(model::encoder_block(x, block, 4, 1e-5));
}
BENCHMARK(BM_EncoderBlock)->Arg(8)->Arg(32)->Arg(64);

// Full two-stream forward on precomputed features.
static void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  num::ParameterSet params;
  num::Rng rng(6);
  model::StanModel m(bench_config(), params, rng);
  const Tensor s = random_tensor({n, 64}, 7), t = random_tensor({n, 64}, 8);
  num::NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(m.build_sequences(s, t)).logits);
}
BENCHMARK(BM_Forward)->Arg(8)->Arg(32)->Arg(64);

static void BM_ForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  num::ParameterSet params;
  num::Rng rng(9);
  model::StanModel m(bench_config(), params, rng);
  const Tensor s = random_tensor({n, 64}, 10), t = random_tensor({n, 64}, 11);
  std::vector<double> y(20, 0.0);
  y[3] = 1.0;
  const Tensor targets({1, 20}, y);
  for (auto _ : state) {
    num::Tape tape;
    Tensor loss;
    {
      num::TapeScope scope(tape);
      loss = m.loss(m.forward(m.build_sequences(s, t)), targets);
    }
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(8)->Arg(32);

BENCHMARK_MAIN();
