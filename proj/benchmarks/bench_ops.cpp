#include <benchmark/benchmark.h>

#include "ddatr/ops.hpp"
#include "ddatr/rng.hpp"

using namespace ddatr;

namespace {

template <typename T>
Tensor<T> rand_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<T> data(numel(shape));
  for (auto& v : data) v = static_cast<T>(rng.normal(0.0, 1.0));
  return Tensor<T>::from_data(std::move(shape), std::move(data));
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
  const std::size_t c = std::size_t(state.range(0));
  const std::size_t hw = std::size_t(state.range(1));
  auto x = rand_tensor<float>({c, hw, hw}, 1);
  auto w = rand_tensor<float>({c, c, 3, 3}, 2);
  auto b = rand_tensor<float>({c}, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(c * c * 9 * hw * hw));
}
BENCHMARK(BM_Conv2dForward)->Args({8, 16})->Args({16, 8})->Args({32, 4})->Args({64, 2})->Args({16, 16});

static void BM_Conv2dBackward(benchmark::State& state) {
  const std::size_t c = std::size_t(state.range(0));
  const std::size_t hw = std::size_t(state.range(1));
  auto x = rand_tensor<float>({c, hw, hw}, 1).set_requires_grad(true);
  auto w = rand_tensor<float>({c, c, 3, 3}, 2).set_requires_grad(true);
  auto b = rand_tensor<float>({c}, 3).set_requires_grad(true);
  for (auto _ : state) {
    Tape<float> tape;
    TapeScope<float> scope(tape);
    auto loss = sum(conv2d(x, w, b, 1, 1));
    tape.backward(loss);
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 16})->Args({16, 8})->Args({32, 4})->Args({16, 16});

static void BM_Conv1x1(benchmark::State& state) {
  const std::size_t c = std::size_t(state.range(0));
  auto x = rand_tensor<float>({c, 256}, 1);
  auto w = rand_tensor<float>({c, c}, 2);
  auto b = rand_tensor<float>({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv1x1(x, w, b));
}
BENCHMARK(BM_Conv1x1)->Arg(16)->Arg(32)->Arg(64);

static void BM_Matmul(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0));
  auto a = rand_tensor<float>({n, n}, 1);
  auto b = rand_tensor<float>({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128);

static void BM_InstanceNorm(benchmark::State& state) {
  auto x = rand_tensor<float>({32, 16, 16}, 1);
  auto g = rand_tensor<float>({32}, 2);
  auto b = rand_tensor<float>({32}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(instance_norm(x, g, b));
}
BENCHMARK(BM_InstanceNorm);

static void BM_Softmax(benchmark::State& state) {
  auto x = rand_tensor<float>({256, 100}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(softmax(x, 1));
}
BENCHMARK(BM_Softmax);
