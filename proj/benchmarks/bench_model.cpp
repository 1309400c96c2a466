#include <benchmark/benchmark.h>

#include "gradcheck.hpp"
#include "splatalign/loss.hpp"
#include "splatalign/model.hpp"
#include "splatalign/tokenizer.hpp"

namespace sa = splatalign;

namespace {

sa::ModelConfig nano() { return sa::ModelConfig::from_preset("nano", 64); }

}  // namespace

static void BM_PreparePatches(benchmark::State& state) {
  const auto config = nano();
  const auto cloud = sa::testing::random_cloud(config.tokenizer.points, 5);
  for (auto _ : state) benchmark::DoNotOptimize(sa::prepare_patches(cloud, config.tokenizer));
}
BENCHMARK(BM_PreparePatches);

static void BM_EmbedOne(benchmark::State& state) {
  const sa::Model model(nano(), 1);
  const auto prepared = sa::prepare_patches(sa::testing::random_cloud(1024, 6), model.config().tokenizer);
  for (auto _ : state) benchmark::DoNotOptimize(model.embed(prepared));
}
BENCHMARK(BM_EmbedOne)->Unit(benchmark::kMillisecond);

// One training step's model work: batched forward, loss, backward.
static void BM_ForwardBackward(benchmark::State& state) {
  const auto config = nano();
  sa::Model model(config, 1);
  const auto problem =
      sa::testing::make_grad_problem(config, static_cast<std::size_t>(state.range(0)), 5, 7);
  for (auto _ : state) benchmark::DoNotOptimize(sa::testing::analytic_gradients(model, problem));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_TotalLoss(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  sa::Rng rng(8);
  sa::LossBatch b;
  auto rows = [&] {
    sa::Matrix m(n, 64);
    for (Eigen::Index i = 0; i < n; ++i) m.row(i) = sa::testing::unit_random(64, rng).transpose();
    return m;
  };
  b.gaussian = rows();
  b.text = rows();
  for (int k = 0; k < 5; ++k) b.views.push_back(rows());
  sa::LossGradients g;
  for (auto _ : state) benchmark::DoNotOptimize(sa::total_loss(b, std::log(0.07), {}, &g));
}
BENCHMARK(BM_TotalLoss)->Arg(16)->Arg(256);
BENCHMARK_MAIN();
