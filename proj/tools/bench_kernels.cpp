// Serial reference vs OpenMP kernels on training-shaped workloads.
// Run: build/tools/bench_kernels [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include "hybridet/augment.hpp"
#include "hybridet/kernels.hpp"
#include "hybridet/rng.hpp"

using namespace hybridet;
using kernels::Mat;

namespace {

Mat random_mat(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  Mat m(r, c);
  for (auto& v : m.v) v = rng.normal();
  return m;
}

template <bool Parallel>
void bm_linear_forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int in = static_cast<int>(state.range(1));
  const int out = static_cast<int>(state.range(2));
  const Mat x = random_mat(n, in, 1);
  const Mat w = random_mat(out, in, 2);
  std::vector<double> b(static_cast<std::size_t>(out), 0.1);
  Mat y(n, out);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::par::linear_forward(x, w, b, y);
    else
      kernels::serial::linear_forward(x, w, b, y);
    benchmark::DoNotOptimize(y.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n) * in * out);
}

template <bool Parallel>
void bm_linear_grad_params(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int in = static_cast<int>(state.range(1));
  const int out = static_cast<int>(state.range(2));
  const Mat x = random_mat(n, in, 3);
  const Mat dy = random_mat(n, out, 4);
  Mat dw(out, in);
  std::vector<double> db(static_cast<std::size_t>(out));
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::par::linear_grad_params(x, dy, dw, db);
    else
      kernels::serial::linear_grad_params(x, dy, dw, db);
    benchmark::DoNotOptimize(dw.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n) * in * out);
}

template <bool Parallel>
void bm_affine_warp(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Rng rng(7);
  ImageBuffer img(side, side);
  for (auto& v : img.pix) v = rng.uniform();
  const std::array<double, 6> m = {0.97, -0.26, 20.0, 0.26, 0.97, -10.0};
  kernels::set_mode(Parallel ? kernels::Mode::Parallel : kernels::Mode::Serial);
  for (auto _ : state) {
    auto out = affine(img, m);
    benchmark::DoNotOptimize(out.pix.data());
    benchmark::ClobberMemory();
  }
  kernels::set_mode(kernels::Mode::Parallel);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(side) * side);
}

}  // namespace

BENCHMARK(bm_linear_forward<false>)->Name("linear_forward/serial")->Args({32, 256, 256})->Args({256, 512, 512});
BENCHMARK(bm_linear_forward<true>)->Name("linear_forward/omp")->Args({32, 256, 256})->Args({256, 512, 512});
BENCHMARK(bm_linear_grad_params<false>)->Name("linear_grad_params/serial")->Args({32, 256, 256})->Args({256, 512, 512});
BENCHMARK(bm_linear_grad_params<true>)->Name("linear_grad_params/omp")->Args({32, 256, 256})->Args({256, 512, 512});
BENCHMARK(bm_affine_warp<false>)->Name("affine_warp/serial")->Arg(256)->Arg(512);
BENCHMARK(bm_affine_warp<true>)->Name("affine_warp/omp")->Arg(256)->Arg(512);

BENCHMARK_MAIN();
