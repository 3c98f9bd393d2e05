#include <benchmark/benchmark.h>

#include "tsseg/kernels.hpp"
#include "tsseg/reference.hpp"
#include "tsseg/segmenter.hpp"

using namespace tsseg;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (auto& x : m.values()) x = static_cast<Real>(rng.uniform(-1, 1));
  return m;
}

// Shapes of the dilated conv in a 64-map segmenter on a 180-frame video.
void BM_MatmulParallel(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(t, 192, 1), b = random_matrix(192, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t * 192 * 64));
}

void BM_MatmulReference(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(t, 192, 1), b = random_matrix(192, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(reference::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t * 192 * 64));
}

void BM_MatmulTnParallel(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(t, 192, 1), b = random_matrix(t, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul_tn(a, b));
}

void BM_MatmulTnReference(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(t, 192, 1), b = random_matrix(t, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(reference::matmul_tn(a, b));
}

void BM_MatmulNtParallel(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(t, 64, 1), b = random_matrix(192, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul_nt(a, b));
}

void BM_MatmulNtReference(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(t, 64, 1), b = random_matrix(192, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(reference::matmul_nt(a, b));
}

// Normalized-adjacency propagation with a 31-frame window.
void BM_Banded(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(t, t, 3), b = random_matrix(t, 32, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::banded_matmul(a, 15, b));
}

void BM_BandedAsDense(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(t, t, 3), b = random_matrix(t, 32, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b));
}

void BM_ConvIm2col(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(t, 64, 5), w = random_matrix(192, 64, 6);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(kernels::im2col3(x, 4), w));
}

void BM_ConvDirect(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(t, 64, 5), w = random_matrix(192, 64, 6), bias(1, 64);
  for (auto _ : state) benchmark::DoNotOptimize(reference::dilated_conv3(x, w, bias, 4));
}

void BM_SegmenterStep(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const TcnParams p = tcn_init({.num_stages = 2, .layers_per_stage = 6, .num_feature_maps = 64, .input_dim = 64,
                                .num_classes = 5},
                               7);
  const Matrix x = random_matrix(t, 64, 8);
  Labels y(t, kUnlabeled);
  y[t / 2] = 1;
  const TimestampAnnotation ts{{t / 2, 1}};
  for (auto _ : state) {
    const TcnForwardTrace tr = tcn_forward(p, x);
    benchmark::DoNotOptimize(tcn_backward(p, x, tr, y, ts, {}));
  }
}

}  // namespace

BENCHMARK(BM_MatmulParallel)->Arg(180)->Arg(1000);
BENCHMARK(BM_MatmulReference)->Arg(180)->Arg(1000);
BENCHMARK(BM_MatmulTnParallel)->Arg(180)->Arg(1000);
BENCHMARK(BM_MatmulTnReference)->Arg(180)->Arg(1000);
BENCHMARK(BM_MatmulNtParallel)->Arg(180)->Arg(1000);
BENCHMARK(BM_MatmulNtReference)->Arg(180)->Arg(1000);
BENCHMARK(BM_Banded)->Arg(180)->Arg(1000);
BENCHMARK(BM_BandedAsDense)->Arg(180)->Arg(1000);
BENCHMARK(BM_ConvIm2col)->Arg(180)->Arg(1000);
BENCHMARK(BM_ConvDirect)->Arg(180)->Arg(1000);
BENCHMARK(BM_SegmenterStep)->Arg(180);

BENCHMARK_MAIN();
