#include <benchmark/benchmark.h>

#include <numeric>

#include "kcurv/family.hpp"
#include "kcurv/geodesic.hpp"

namespace {

kcurv::GeodesicProblem problem(int p) {
  const auto params = kcurv::FamilyParams::make(p, "exp(y)+exp(2*y)");
  const auto m = static_cast<std::size_t>(params.dimension());
  std::vector<double> v(m, 0.1);
  v[0] = 1.0;
  return {kcurv::build_metric(params), std::vector<double>(m, 0.0), v, std::nullopt, 10.0, 101, {}};
}

std::vector<int> identity(std::size_t m) {
  std::vector<int> o(m);
  std::iota(o.begin(), o.end(), 0);
  return o;
}

void BM_Dopri5(benchmark::State& state) {
  const auto pb = problem(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kcurv::integrate_ivp(pb));
}
BENCHMARK(BM_Dopri5)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Triangular(benchmark::State& state) {
  const auto pb = problem(static_cast<int>(state.range(0)));
  const auto order = identity(pb.start.size());
  for (auto _ : state) benchmark::DoNotOptimize(kcurv::triangular_solve(pb, order));
}
BENCHMARK(BM_Triangular)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ExpLog(benchmark::State& state) {
  const auto params = kcurv::FamilyParams::make(1, "exp(y)+exp(2*y)");
  const auto g = kcurv::build_metric(params);
  const std::vector<double> P(8, 0.1), Q{0.5, -0.3, 0.2, 0.7, -0.1, 0.4, 0.9, -0.6};
  const auto order = identity(8);
  for (auto _ : state) benchmark::DoNotOptimize(kcurv::exp_map(g, P, kcurv::log_map(g, P, Q, order)));
}
BENCHMARK(BM_ExpLog)->Unit(benchmark::kMillisecond);

}  // namespace
