#include <benchmark/benchmark.h>

#include <vector>

#include "qpspec/arithmetic.hpp"
#include "qpspec/dynamics.hpp"
#include "qpspec/spectral.hpp"

using namespace qpspec;

namespace {

const model::OperatorPoint& op() {
  static const auto cf = arithmetic::parse_frequency("golden", 30);
  static const model::OperatorPoint p(model::PotentialSpec(model::Sawtooth{8.0, -4.0}), cf, 0.1);
  return p;
}

std::vector<double> energies(std::size_t count) {
  std::vector<double> E(count);
  for (std::size_t k = 0; k < count; ++k) E[k] = -6.0 + 12.0 * static_cast<double>(k) / static_cast<double>(count - 1);
  return E;
}

void BM_lyapunov_sweep(benchmark::State& state) {
  const auto E = energies(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dynamics::lyapunov_sweep(op(), E, 2000, 32));
}

void BM_lyapunov_sweep_serial(benchmark::State& state) {
  const auto E = energies(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dynamics::lyapunov_sweep_serial(op(), E, 2000, 32));
}

void BM_empirical_measure(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(spectral::empirical_measure(op(), state.range(0), 4));
}

void BM_empirical_measure_serial(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(spectral::empirical_measure_serial(op(), state.range(0), 4));
}

}  // namespace

BENCHMARK(BM_lyapunov_sweep)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_lyapunov_sweep_serial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_empirical_measure)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_empirical_measure_serial)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
