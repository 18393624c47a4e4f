#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mmdebias/kernels/kernels.hpp"

namespace kernels = mmdebias::kernels;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <auto Kernel>
void sq_distances(benchmark::State& state) {
  const std::size_t n = state.range(0), dim = 64;
  auto rows = gaussian(n * dim, 1), query = gaussian(dim, 2);
  std::vector<double> out(n);
  for (auto _ : state) {
    Kernel(rows, dim, query, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

template <auto Kernel>
void project(benchmark::State& state) {
  const std::size_t n = state.range(0), in = 256, out_dim = 32;
  auto x = gaussian(n * in, 1), w = gaussian(out_dim * in, 2);
  std::vector<double> y(n * out_dim);
  for (auto _ : state) {
    Kernel(x, n, in, w, out_dim, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

template <auto Kernel>
void angular_loss(benchmark::State& state) {
  const std::size_t n = state.range(0), dim = 32;
  auto a = gaussian(n * dim, 1), p = gaussian(n * dim, 2), q = gaussian(n * dim, 3);
  std::vector<double> loss(n), ga(n * dim), gp(n * dim), gn(n * dim);
  kernels::AngularBatch batch{a, p, q, n, dim, 1.0, true, loss, ga, gp, gn};
  for (auto _ : state) {
    Kernel(batch);
    benchmark::DoNotOptimize(loss.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

BENCHMARK(sq_distances<kernels::serial::sq_distances>)->Name("sq_distances/serial")->Range(1 << 10, 1 << 16);
BENCHMARK(sq_distances<kernels::omp::sq_distances>)->Name("sq_distances/omp")->Range(1 << 10, 1 << 16);
BENCHMARK(project<kernels::serial::project>)->Name("project/serial")->Range(1 << 8, 1 << 12);
BENCHMARK(project<kernels::omp::project>)->Name("project/omp")->Range(1 << 8, 1 << 12);
BENCHMARK(angular_loss<kernels::serial::angular_loss>)->Name("angular_loss/serial")->Range(1 << 8, 1 << 14);
BENCHMARK(angular_loss<kernels::omp::angular_loss>)->Name("angular_loss/omp")->Range(1 << 8, 1 << 14);

BENCHMARK_MAIN();
