#include <benchmark/benchmark.h>

#include <limits>
#include <random>
#include <vector>

#include "shapeinv/kernels.hpp"
#include "shapeinv/metrics.hpp"
#include "shapeinv/objective.hpp"
#include "shapeinv/random.hpp"

using namespace shapeinv;

namespace {

PointCloud cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(Vec3(u(rng), u(rng), u(rng)));
  return c;
}

// Serial and OpenMP variants take the same arguments, so each benchmark is
// registered twice with a flag selecting the implementation.

void BM_NearestNeighbors(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = cloud(n, 1), b = cloud(n, 2);
  for (auto _ : state) {
    auto r = state.range(1) ? kernels::nearest_neighbors(a, b) : kernels::serial::nearest_neighbors(a, b);
    benchmark::DoNotOptimize(r);
  }
}

void BM_BatchKnn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = cloud(n, 3);
  const KdTree index(cloud(n, 4));
  for (auto _ : state) {
    auto r = state.range(1) ? kernels::batch_knn(index, a, 5) : kernels::serial::batch_knn(index, a, 5);
    benchmark::DoNotOptimize(r);
  }
}

void BM_PairwiseDistances(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = cloud(n, 5), b = cloud(n, 6);
  for (auto _ : state) {
    Mat d = state.range(1) ? kernels::pairwise_distances(a, b) : kernels::serial::pairwise_distances(a, b);
    benchmark::DoNotOptimize(d.data());
  }
}

void BM_UpdateMinDist(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Mat rows = Mat::Random(n, 96);
  std::vector<double> min_d(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (auto _ : state) {
    if (state.range(1)) {
      kernels::update_min_dist(rows, 0, min_d);
    } else {
      kernels::serial::update_min_dist(rows, 0, min_d);
    }
    benchmark::DoNotOptimize(min_d.data());
  }
}

void BM_Chamfer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = cloud(n, 7), b = cloud(n, 8);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_cd_t(a, b).value);
}

void BM_PatchVariance(benchmark::State& state) {
  const PointCloud a = cloud(static_cast<std::size_t>(state.range(0)), 9);
  for (auto _ : state) benchmark::DoNotOptimize(patch_variance(a).value);
}

void BM_ExactEmd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = cloud(n, 10), b = cloud(n, 11);
  for (auto _ : state) benchmark::DoNotOptimize(emd(a, b));
}

}  // namespace

BENCHMARK(BM_NearestNeighbors)->ArgsProduct({{256, 2048}, {0, 1}})->ArgNames({"n", "omp"});
BENCHMARK(BM_BatchKnn)->ArgsProduct({{256, 2048}, {0, 1}})->ArgNames({"n", "omp"});
BENCHMARK(BM_PairwiseDistances)->ArgsProduct({{256, 1024}, {0, 1}})->ArgNames({"n", "omp"});
BENCHMARK(BM_UpdateMinDist)->ArgsProduct({{256, 4096}, {0, 1}})->ArgNames({"n", "omp"});
BENCHMARK(BM_Chamfer)->Arg(256)->Arg(2048);
BENCHMARK(BM_PatchVariance)->Arg(256)->Arg(2048);
BENCHMARK(BM_ExactEmd)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
