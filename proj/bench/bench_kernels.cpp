#include <benchmark/benchmark.h>

#include <random>

#include "imb/kernels.hpp"

using namespace imb::kernels;

namespace {

std::vector<double> random_values(std::size_t n) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Training matrices are lag windows: 8 to 16 features.
constexpr std::size_t kCols = 12;

void BM_RbfGramSerial(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto x = random_values(rows * kCols);
  for (auto _ : state) benchmark::DoNotOptimize(serial::rbf_gram({x, rows, kCols}, 0.1));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(rows * (rows - 1) / 2));
}

void BM_RbfGramOmp(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto x = random_values(rows * kCols);
  for (auto _ : state) benchmark::DoNotOptimize(omp::rbf_gram({x, rows, kCols}, 0.1));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(rows * (rows - 1) / 2));
}

void BM_PeriodStddevSerial(benchmark::State& state) {
  const auto days = static_cast<std::size_t>(state.range(0));
  const auto v = random_values(days * 48);
  for (auto _ : state) benchmark::DoNotOptimize(serial::period_stddev(v, 48));
}

void BM_PeriodStddevOmp(benchmark::State& state) {
  const auto days = static_cast<std::size_t>(state.range(0));
  const auto v = random_values(days * 48);
  for (auto _ : state) benchmark::DoNotOptimize(omp::period_stddev(v, 48));
}

}  // namespace

BENCHMARK(BM_RbfGramSerial)->Arg(250)->Arg(500)->Arg(1000);
BENCHMARK(BM_RbfGramOmp)->Arg(250)->Arg(500)->Arg(1000);
BENCHMARK(BM_PeriodStddevSerial)->Arg(20)->Arg(365);
BENCHMARK(BM_PeriodStddevOmp)->Arg(20)->Arg(365);

BENCHMARK_MAIN();
