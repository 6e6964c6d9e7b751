#include <benchmark/benchmark.h>

#include <random>

#include "kcurv/expr.hpp"
#include "kcurv/jet.hpp"

namespace {

kcurv::Jet filled(const kcurv::VariableList& v, int order, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  kcurv::Jet j(v, order);
  for (double& c : j.coefficients()) c = d(rng);
  return j;
}

void BM_JetMultiply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int order = static_cast<int>(state.range(1));
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("v" + std::to_string(i));
  const auto vars = kcurv::make_variable_list(names);
  const auto a = filled(vars, order, 1), b = filled(vars, order, 2);
  for (auto _ : state) benchmark::DoNotOptimize(a * b);
  state.counters["coefficients"] = static_cast<double>(a.coefficients().size());
}
BENCHMARK(BM_JetMultiply)->Args({3, 3})->Args({6, 4})->Args({8, 5})->Args({10, 7});

void BM_JetExp(benchmark::State& state) {
  const auto vars = kcurv::make_variable_list({"a", "b", "c", "d", "e", "f"});
  const auto a = filled(vars, static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(kcurv::exp(a));
}
BENCHMARK(BM_JetExp)->Arg(2)->Arg(4)->Arg(6);

void BM_ExprJet(benchmark::State& state) {
  const std::vector<std::string> chart{"x", "y", "z0", "z1"};
  const auto e = kcurv::parse("exp(y) + exp(2*y) + y*z0 + y^2*z1", chart);
  const auto jc = kcurv::make_jet_chart(chart, std::span<const std::string>(chart));
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  for (auto _ : state) benchmark::DoNotOptimize(kcurv::eval_jet(e, p, jc, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_ExprJet)->Arg(3)->Arg(6);

}  // namespace
