#include <benchmark/benchmark.h>

#include <vector>

#include "flowcast/flow.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/random.hpp"
#include "flowcast/rq_spline.hpp"
#include "flowcast/training.hpp"

using namespace flowcast;

namespace {

std::vector<double> uniform(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

FlowConfig bench_config(std::size_t dim, std::size_t ctx) {
    FlowConfig c;
    c.dim = dim;
    c.context_dim = ctx;
    c.zero_init_conditioners = false;
    c.unit_interval_targets = true;
    return c;
}

void BM_SplineScalarInverse(benchmark::State& state) {
    const auto bins = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const auto params = normalize_params(uniform(rng, spline_raw_size(bins), -1, 1), bins, 5.0);
    const auto ys = uniform(rng, 1024, -6, 6);
    for (auto _ : state) {
        double acc = 0.0;
        for (double y : ys) acc += spline_inverse(y, params).value;
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ys.size()));
}
BENCHMARK(BM_SplineScalarInverse)->Arg(10)->Arg(50);

void BM_SplineTensorInverse(benchmark::State& state) {
    const std::size_t rows = 256, bins = 10;
    Rng rng(2);
    const auto y = ad::Tensor::matrix(rows, 1, uniform(rng, rows, -6, 6));
    const auto raw = ad::Tensor::matrix(rows, spline_raw_size(bins), uniform(rng, rows * spline_raw_size(bins), -1, 1));
    ad::NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(spline_inverse(y, raw, bins, 5.0).value.data().data());
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_SplineTensorInverse);

// One training step of the reference architecture: NLL of a 256-row batch and its backward pass.
void BM_NllStep(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    const std::size_t ctx = 6 * dim, rows = 256;
    auto flow = make_flow(bench_config(dim, ctx));
    Rng rng(3);
    const auto y = uniform(rng, rows * dim, 0.0, 1.0);
    const auto x = uniform(rng, rows * ctx, 0.0, 1.0);
    const auto params = flow.parameters();
    for (auto _ : state) {
        for (auto p : params) p.zero_grad();
        ad::backward(flow.nll(y, x));
    }
}
BENCHMARK(BM_NllStep)->Arg(1)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_SampleScenarios(benchmark::State& state) {
    const std::size_t dim = 6, ctx = 6;
    auto flow = make_flow(bench_config(dim, ctx));
    Rng rng(4);
    const auto x = uniform(rng, ctx, 0.0, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(sample_scenarios(flow, x, 100, rng).data());
}
BENCHMARK(BM_SampleScenarios)->Unit(benchmark::kMillisecond);

void BM_EnergyScore(benchmark::State& state) {
    Rng rng(5);
    const ScenarioSet s{Matrix(100, 6, uniform(rng, 600, 0, 1))};
    const auto obs = uniform(rng, 6, 0, 1);
    for (auto _ : state) benchmark::DoNotOptimize(energy_score(s, obs));
}
BENCHMARK(BM_EnergyScore);

}  // namespace

BENCHMARK_MAIN();
