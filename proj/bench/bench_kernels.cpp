// Serial reference kernels against their OpenMP counterparts.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "hcl/kernels.hpp"
#include "hcl/rng.hpp"

namespace {

hcl::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    hcl::Rng rng(seed);
    hcl::Matrix m(r, c);
    for (double& v : m.flat()) v = hcl::standard_normal(rng);
    return m;
}

// Symmetric joint affinities, as t-SNE would see them.
hcl::Matrix joint_affinities(std::size_t n) {
    const hcl::Matrix d2 = hcl::kernels::serial::pairwise_sq_dists(random_matrix(n, 10, 3));
    const hcl::Matrix cond = hcl::kernels::serial::conditional_affinities(d2, {30.0, 1e-5, 200});
    hcl::Matrix p(n, n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) sum += p(i, j) = cond(i, j) + cond(j, i);
    for (double& v : p.flat()) v /= sum;
    return p;
}

template <auto Fn>
void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const hcl::Matrix a = random_matrix(n, 256, 1), b = random_matrix(256, 128, 2);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 256 * 128));
}

template <auto Fn>
void bm_pairwise(benchmark::State& state) {
    const hcl::Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 50, 4);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(x));
}

template <auto Fn>
void bm_affinities(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const hcl::Matrix d2 = hcl::kernels::serial::pairwise_sq_dists(random_matrix(n, 10, 5));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(d2, hcl::kernels::AffinityOptions{30.0, 1e-5, 200}));
}

template <auto Fn>
void bm_tsne_gradient(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const hcl::Matrix p = joint_affinities(n), y = random_matrix(n, 2, 6);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(p, y));
}

template <auto Fn>
void bm_covariance(benchmark::State& state) {
    const hcl::Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 64, 7);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(x));
}

namespace k = hcl::kernels;

BENCHMARK(bm_matmul<k::serial::matmul>)->Name("matmul/serial")->Arg(256)->Arg(1024);
BENCHMARK(bm_matmul<k::omp::matmul>)->Name("matmul/omp")->Arg(256)->Arg(1024);
BENCHMARK(bm_pairwise<k::serial::pairwise_sq_dists>)->Name("pairwise_sq_dists/serial")->Arg(500)->Arg(2000);
BENCHMARK(bm_pairwise<k::omp::pairwise_sq_dists>)->Name("pairwise_sq_dists/omp")->Arg(500)->Arg(2000);
BENCHMARK(bm_affinities<k::serial::conditional_affinities>)->Name("affinities/serial")->Arg(500)->Arg(1000);
BENCHMARK(bm_affinities<k::omp::conditional_affinities>)->Name("affinities/omp")->Arg(500)->Arg(1000);
BENCHMARK(bm_tsne_gradient<k::serial::tsne_gradient>)->Name("tsne_gradient/serial")->Arg(500)->Arg(1000);
BENCHMARK(bm_tsne_gradient<k::omp::tsne_gradient>)->Name("tsne_gradient/omp")->Arg(500)->Arg(1000);
BENCHMARK(bm_covariance<k::serial::covariance>)->Name("covariance/serial")->Arg(1000)->Arg(5000);
BENCHMARK(bm_covariance<k::omp::covariance>)->Name("covariance/omp")->Arg(1000)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
