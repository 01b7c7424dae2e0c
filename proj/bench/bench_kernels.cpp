#include <benchmark/benchmark.h>

#include "sparse_infer/feasible.hpp"
#include "sparse_infer/kernels.hpp"
#include "sparse_infer/mc.hpp"
#include "sparse_infer/solvers.hpp"

using namespace sparse_infer;

namespace {

MeanRegressionDraw draw(Index p) {
    DgpSpec spec = mean_regression_spec(1.0);
    spec.p = p;
    return gen_mean_regression(spec, 0);
}

void BM_LassoSolve(benchmark::State& state) {
    const MeanRegressionDraw m = draw(state.range(0));
    const Dataset d = normalize(m.data);
    const IndexSet unpen{0};
    const double lambda = 0.3 * lasso_lambda_max(d.x, d.y, unpen);
    for (auto _ : state) benchmark::DoNotOptimize(fit_lasso(d, lambda, unpen));
}
BENCHMARK(BM_LassoSolve)->Arg(100)->Arg(500)->Arg(2000);

void BM_SqrtLassoSolve(benchmark::State& state) {
    const MeanRegressionDraw m = draw(state.range(0));
    const Dataset d = normalize(m.data);
    const IndexSet unpen{0};
    const double lambda = 0.2 * lasso_lambda_max(d.x, d.y, unpen);
    for (auto _ : state) benchmark::DoNotOptimize(fit_sqrt_lasso(d, lambda, unpen));
}
BENCHMARK(BM_SqrtLassoSolve)->Arg(100)->Arg(500)->Arg(2000);

void BM_ScoreMaxima(benchmark::State& state) {
    const MeanRegressionDraw m = draw(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(score_maxima(m.data.x, SeedSpec{1, 0}, 1000));
}
BENCHMARK(BM_ScoreMaxima)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FeasibleSqrtLasso(benchmark::State& state) {
    const MeanRegressionDraw m = draw(state.range(0));
    FitRequest req;
    req.post = true;
    for (auto _ : state) benchmark::DoNotOptimize(fit_feasible(m.data, req, SeedSpec{1, 0}));
}
BENCHMARK(BM_FeasibleSqrtLasso)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_SparseEigenSampled(benchmark::State& state) {
    const Dataset d = normalize(draw(500).data);
    for (auto _ : state)
        benchmark::DoNotOptimize(sparse_eigenvalues(d, state.range(0), EigenMode::sampled, 2000, SeedSpec{1, 0}));
}
BENCHMARK(BM_SparseEigenSampled)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
