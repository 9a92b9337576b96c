// Serial reference vs OpenMP kernels on coreset-sized inputs.

#include <benchmark/benchmark.h>

#include <vector>

#include "seqcore/kernels.hpp"
#include "seqcore/random.hpp"

using namespace seqcore;

namespace {

std::vector<float> points(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> out(n * dim);
  for (float& v : out) v = static_cast<float>(rng.uniform());
  return out;
}

constexpr std::size_t kDim = 12;

template <auto Nearest>
void bm_nearest(benchmark::State& state) {
  const auto members = points(static_cast<std::size_t>(state.range(0)), kDim, 1);
  const auto queries = points(2048, kDim, 2);
  std::vector<kernels::NearestHit> out(2048);
  for (auto _ : state) {
    Nearest(queries, members, kDim, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 2048 * state.range(0));
}

template <auto Pairwise>
void bm_pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pts = points(n, kDim, 3);
  std::vector<float> out(n * n);
  for (auto _ : state) {
    Pairwise(pts, kDim, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <auto Blur>
void bm_blur(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Image img(side, side);
  img.values() = points(side * side, 1, 4);
  const auto taps = kernels::gaussian_taps(4.0, 33);
  for (auto _ : state) benchmark::DoNotOptimize(Blur(img, taps));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

}  // namespace

BENCHMARK(bm_nearest<kernels::serial::nearest>)->Name("nearest/serial")->Arg(256)->Arg(2048);
BENCHMARK(bm_nearest<kernels::omp::nearest>)->Name("nearest/omp")->Arg(256)->Arg(2048);
BENCHMARK(bm_pairwise<kernels::serial::pairwise>)->Name("pairwise/serial")->Arg(512)->Arg(2048);
BENCHMARK(bm_pairwise<kernels::omp::pairwise>)->Name("pairwise/omp")->Arg(512)->Arg(2048);
BENCHMARK(bm_blur<kernels::serial::blur>)->Name("blur/serial")->Arg(256)->Arg(1024);
BENCHMARK(bm_blur<kernels::omp::blur>)->Name("blur/omp")->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
