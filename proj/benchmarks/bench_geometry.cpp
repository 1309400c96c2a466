#include <benchmark/benchmark.h>

#include "splatalign/curves.hpp"
#include "splatalign/patches.hpp"
#include "splatalign/sampling.hpp"
#include "test_support.hpp"

namespace sa = splatalign;

static void BM_FarthestPointSampling(benchmark::State& state) {
  const auto cloud = sa::testing::random_cloud(static_cast<std::size_t>(state.range(0)), 1);
  const auto pos = sa::cloud_positions(cloud);
  for (auto _ : state) benchmark::DoNotOptimize(sa::farthest_point_sampling(pos, 64));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FarthestPointSampling)->Arg(1024)->Arg(4096)->Arg(16384);

static void BM_KnnGroup(benchmark::State& state) {
  const auto cloud = sa::testing::random_cloud(static_cast<std::size_t>(state.range(0)), 2);
  const auto pos = sa::cloud_positions(cloud);
  const auto centers = sa::farthest_point_sampling(pos, 64);
  for (auto _ : state) benchmark::DoNotOptimize(sa::knn_group(pos, centers, 16));
}
BENCHMARK(BM_KnnGroup)->Arg(1024)->Arg(4096);

static void BM_BuildPatches(benchmark::State& state) {
  const auto cloud = sa::testing::random_cloud(1024, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sa::build_patches(cloud, 64, 16));
}
BENCHMARK(BM_BuildPatches);

static void BM_HilbertEncode(benchmark::State& state) {
  const auto bits = static_cast<unsigned>(state.range(0));
  std::uint32_t i = 0;
  const std::uint32_t mask = (1u << bits) - 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sa::hilbert_encode({i & mask, (i * 7) & mask, (i * 13) & mask}, bits));
    ++i;
  }
}
BENCHMARK(BM_HilbertEncode)->Arg(4)->Arg(10)->Arg(21);

static void BM_MortonEncode(benchmark::State& state) {
  const auto bits = static_cast<unsigned>(state.range(0));
  std::uint32_t i = 0;
  const std::uint32_t mask = (1u << bits) - 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sa::morton_encode({i & mask, (i * 7) & mask, (i * 13) & mask}, bits));
    ++i;
  }
}
BENCHMARK(BM_MortonEncode)->Arg(4)->Arg(10)->Arg(21);

static void BM_OrderPatches(benchmark::State& state) {
  const auto cloud = sa::testing::random_cloud(64, 4);
  const auto centers = sa::cloud_positions(cloud);
  const auto o = static_cast<sa::Ordering>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sa::order_patches(centers, o, 10));
  state.SetLabel(std::string(sa::ordering_name(o)));
}
BENCHMARK(BM_OrderPatches)->DenseRange(0, 2);
