#include <benchmark/benchmark.h>

#include "fedsurf/estimators.hpp"
#include "fedsurf/federation.hpp"
#include "fedsurf/forest.hpp"
#include "fedsurf/metrics.hpp"
#include "fedsurf/synthetic.hpp"

using namespace fedsurf;

namespace {

const SurvivalDataset& bench_data(std::size_t n) {
    static auto small = generate_synthetic(500, 8, 0.4, 1);
    static auto large = generate_synthetic(5000, 8, 0.4, 2);
    return n <= 500 ? small : large;
}

void BM_KaplanMeier(benchmark::State& state) {
    const auto& data = bench_data(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(kaplan_meier(data));
    }
}
BENCHMARK(BM_KaplanMeier)->Arg(500)->Arg(5000);

void BM_FitTree(benchmark::State& state) {
    const auto& data = bench_data(static_cast<std::size_t>(state.range(0)));
    auto grid = std::make_shared<const std::vector<double>>(data.distinct_event_times());
    ForestParams params;
    std::uint64_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            fit_tree(data, params, grid, Rng(7).derive(streams::kForestTree).derive(i++)));
    }
}
BENCHMARK(BM_FitTree)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_FitForest100(benchmark::State& state) {
    const auto& data = bench_data(500);
    ForestParams params;
    params.seed = 3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_forest(data, params));
    }
}
BENCHMARK(BM_FitForest100)->Unit(benchmark::kMillisecond);

void BM_PredictChf(benchmark::State& state) {
    const auto& data = bench_data(500);
    ForestParams params;
    params.seed = 3;
    const Forest forest = fit_forest(data, params);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict_chf(forest, data[i++ % data.size()].features));
    }
}
BENCHMARK(BM_PredictChf);

void BM_ConcordanceIndex(benchmark::State& state) {
    const auto& data = bench_data(static_cast<std::size_t>(state.range(0)));
    const StepFunction g = censoring_survival(data);
    Rng rng(9);
    std::vector<double> risks(data.size());
    for (auto& r : risks) r = rng.uniform01();
    for (auto _ : state) {
        benchmark::DoNotOptimize(concordance_index_ipcw(g, data, risks, 1e18));
    }
}
BENCHMARK(BM_ConcordanceIndex)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_RunFedSurf(benchmark::State& state) {
    const auto& data = bench_data(5000);
    FederationConfig config;
    config.seed = 5;
    ForestParams params;
    params.n_trees = 20;
    params.seed = 5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_fedsurf(data, config, params));
    }
}
BENCHMARK(BM_RunFedSurf)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
