// Serial reference vs OpenMP kernels. Argument 0 runs serial, 1 runs parallel.
#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "nstab/cube.hpp"
#include "nstab/hermite_analysis.hpp"
#include "nstab/partition.hpp"
#include "nstab/poly_gauss.hpp"
#include "nstab/product_space.hpp"
#include "nstab/tensor_ops.hpp"

using namespace nstab;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_Stability(benchmark::State& state) {
  const auto f = PartitionFn::cells({{-0.5, 0.5}, {0.0}}, {0, 1, 2, 2, 1, 0}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_stability(f, 0.5, 200000, 1, exec_of(state)));
  label(state);
}

void BM_PtfStability(benchmark::State& state) {
  const auto f = PartitionFn::ptf({hermite_poly(3, 0, 2).shifted(-0.2), hermite_poly(3, 1, 3)});
  for (auto _ : state) benchmark::DoNotOptimize(estimate_stability(f, 0.5, 100000, 1, exec_of(state)));
  label(state);
}

void BM_Walsh(benchmark::State& state) {
  const auto f = make_voting_rule(VotingRule::plurality, 16, 3);
  for (auto _ : state) benchmark::DoNotOptimize(walsh_transform(f, exec_of(state)));
  label(state);
}

void BM_Expand(benchmark::State& state) {
  VectorFunction f{2, 1, [](std::span<const double> x, std::span<double> out) {
                     out[0] = std::tanh(x[0] - 0.5 * x[1] * x[1]);
                   }};
  for (auto _ : state) benchmark::DoNotOptimize(expand(f, 12, 60, exec_of(state)));
  label(state);
}

void BM_ProductExpectation(benchmark::State& state) {
  GramSpec spec;
  spec.levels.push_back({2, Eigen::MatrixXd::Identity(3, 3)});
  const auto fam = matched_family(spec, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(product_expectation_mc(fam.family, 50000, 1, exec_of(state)));
  label(state);
}

void BM_DiscreteCorrelation(benchmark::State& state) {
  const auto J = binary_symmetric(0.5);
  const auto b = correlation_basis(J);
  const auto g = PartitionFn::halfspace({0.0}, {1.0});
  const auto f = block_strategy(g, {b.X(0, 1), b.X(1, 1)}, 32);
  const auto h = block_strategy(g, {b.Y(0, 1), b.Y(1, 1)}, 32);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_discrete_corr(f, h, J, 100000, 1, exec_of(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_Stability)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PtfStability)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Walsh)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Expand)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProductExpectation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DiscreteCorrelation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
