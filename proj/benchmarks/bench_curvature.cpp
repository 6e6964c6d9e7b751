#include <benchmark/benchmark.h>

#include "kcurv/family.hpp"
#include "kcurv/invariants.hpp"

namespace {

void BM_NablaKR(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto params = kcurv::FamilyParams::make(p, "exp(y)+exp(2*y)");
  const auto g = kcurv::build_metric(params);
  const std::vector<double> pt(static_cast<std::size_t>(params.dimension()), 0.2);
  for (auto _ : state) {
    auto e = kcurv::CurvatureEngine::for_derivative_order(g, pt, p + 3);
    benchmark::DoNotOptimize(e.sparse_tensor(p + 3));
  }
}
BENCHMARK(BM_NablaKR)->DenseRange(-1, 2)->Unit(benchmark::kMillisecond);

void BM_Oracle(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto params = kcurv::FamilyParams::make(p, "exp(y)+exp(2*y)");
  const std::vector<double> pt(static_cast<std::size_t>(params.dimension()), 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(kcurv::oracle_nabla_k_R(params, pt, p + 3));
}
BENCHMARK(BM_Oracle)->DenseRange(-1, 2);

void BM_Catalog(benchmark::State& state) {
  const auto params = kcurv::FamilyParams::make(1, "exp(y)+exp(2*y)");
  const std::vector<double> pt(8, 0.2);
  const auto list = kcurv::catalog(3, 2);
  for (auto _ : state) {
    kcurv::CurvatureEngine e(kcurv::build_metric(params), pt, 4);
    double acc = 0.0;
    for (const auto& s : list) acc += kcurv::evaluate(s, e);
    benchmark::DoNotOptimize(acc);
  }
  state.counters["schemas"] = static_cast<double>(list.size());
}
BENCHMARK(BM_Catalog)->Unit(benchmark::kMillisecond);

void BM_Frame(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto params = kcurv::FamilyParams::make(p, "exp(y)+exp(2*y)");
  const std::vector<double> pt(static_cast<std::size_t>(params.dimension()), 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(kcurv::normalize_frame(params, pt));
}
BENCHMARK(BM_Frame)->DenseRange(-1, 2);

}  // namespace
