// Serial reference vs OpenMP kernels on selection-sized inputs.
// Run with e.g. OMP_NUM_THREADS=4 ./bench_kernels

#include <benchmark/benchmark.h>

#include <limits>
#include <numeric>

#include "gcal/coreset.hpp"
#include "gcal/kernels.hpp"
#include "gcal/rng.hpp"

using namespace gcal;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

template <bool Parallel>
void BM_UpdateMinDist(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix emb = random_matrix(n, 32, 1);
    std::vector<double> md(n, std::numeric_limits<double>::infinity());
    std::size_t center = 0;
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::update_min_dist(emb, center, md);
        else
            kernels::serial::update_min_dist(emb, center, md);
        center = (center + 7919) % n;
        benchmark::DoNotOptimize(md.data());
    }
    state.SetItemsProcessed(static_cast<long>(state.iterations() * n));
}

template <bool Parallel>
void BM_CoverRadius(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix emb = random_matrix(n, 32, 2);
    std::vector<std::size_t> centers;
    for (std::size_t i = 0; i < n; i += 50) centers.push_back(i);
    for (auto _ : state) {
        double r = Parallel ? kernels::cover_radius(emb, centers) : kernels::serial::cover_radius(emb, centers);
        benchmark::DoNotOptimize(r);
    }
}

template <bool Parallel>
void BM_Silhouette(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix emb = random_matrix(n, 32, 3);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 40);
    for (auto _ : state) {
        auto s = Parallel ? kernels::silhouette_values(emb, labels, 40)
                          : kernels::serial::silhouette_values(emb, labels, 40);
        benchmark::DoNotOptimize(s.data());
    }
}

template <bool Parallel>
void BM_PairwiseDeviation(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix px = random_matrix(n, 256, 4);
    std::vector<std::size_t> members(n);
    std::iota(members.begin(), members.end(), 0);
    for (auto _ : state) {
        double s = Parallel ? kernels::pairwise_abs_deviation_sum(px, members)
                            : kernels::serial::pairwise_abs_deviation_sum(px, members);
        benchmark::DoNotOptimize(s);
    }
}

void BM_KCenterGreedy(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix emb = random_matrix(n, 32, 5);
    std::vector<std::size_t> none;
    for (auto _ : state) {
        auto s = k_center_greedy(emb, none, n / 20);
        benchmark::DoNotOptimize(s.labeled.data());
    }
}

}  // namespace

BENCHMARK(BM_UpdateMinDist<false>)->Arg(4096)->Arg(65536);
BENCHMARK(BM_UpdateMinDist<true>)->Arg(4096)->Arg(65536);
BENCHMARK(BM_CoverRadius<false>)->Arg(4096);
BENCHMARK(BM_CoverRadius<true>)->Arg(4096);
BENCHMARK(BM_Silhouette<false>)->Arg(1000);
BENCHMARK(BM_Silhouette<true>)->Arg(1000);
BENCHMARK(BM_PairwiseDeviation<false>)->Arg(480);
BENCHMARK(BM_PairwiseDeviation<true>)->Arg(480);
BENCHMARK(BM_KCenterGreedy)->Arg(4096);

BENCHMARK_MAIN();
