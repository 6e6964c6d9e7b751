#include <doctest.h>

#include <algorithm>
#include <random>

#include "kcurv/error.hpp"
#include "kcurv/family.hpp"
#include "kcurv/invariants.hpp"
#include "support.hpp"

using namespace kcurv;

namespace {

bool contains(const std::vector<ContractionSchema>& list, const ContractionSchema& s) {
  const auto c = s.canonical();
  return std::any_of(list.begin(), list.end(), [&](const ContractionSchema& t) { return t.canonical() == c; });
}

// Generic Riemannian metric in three variables with non-trivial curvature derivatives.
MetricSpec lumpy() {
  MetricSpec s({"a", "b", "c"}, {0, 3});
  s.set_component(0, 0, "exp(0.3*a)");
  s.set_component(1, 1, "1 + b^2");
  s.set_component(2, 2, "2 + sin(a*c)");
  s.set_component(0, 1, "0.1*a*b");
  s.set_component(1, 2, "0.2*cos(c)");
  return s;
}

// Same schema with its factors listed in the order `perm`.
ContractionSchema permute_factors(const ContractionSchema& s, const std::vector<int>& perm) {
  std::vector<int> begin(s.factors.size());
  int acc = 0;
  for (std::size_t f = 0; f < s.factors.size(); ++f) {
    begin[f] = acc;
    acc += 4 + s.factors[f];
  }
  ContractionSchema out;
  std::vector<int> new_begin(s.factors.size());
  acc = 0;
  for (int f : perm) {
    out.factors.push_back(s.factors[static_cast<std::size_t>(f)]);
    new_begin[static_cast<std::size_t>(f)] = acc;
    acc += 4 + s.factors[static_cast<std::size_t>(f)];
  }
  const auto relabel = [&](int slot) {
    std::size_t f = 0;
    while (f + 1 < begin.size() && begin[f + 1] <= slot) ++f;
    return new_begin[f] + (slot - begin[f]);
  };
  for (const auto& [a, b] : s.pairs) out.pairs.emplace_back(relabel(b), relabel(a));
  return out;
}

}  // namespace

TEST_SUITE("weyl_invariants") {
  TEST_CASE("catalog contents") {
    const auto c10 = catalog(1, 0);
    CHECK(c10.size() == 3);
    CHECK(contains(c10, schemas::scalar_curvature()));
    CHECK(contains(catalog(2, 1), schemas::nabla_riemann_norm()));
    const auto c32 = catalog(3, 2);
    for (const auto& s : {schemas::scalar_curvature(), schemas::ricci_norm(), schemas::riemann_norm(),
                          schemas::nabla_riemann_norm(), schemas::cubic_a(), schemas::cubic_b(),
                          schemas::laplacian_scalar()}) {
      CHECK(contains(c32, s));
    }
    std::vector<std::string> keys;
    for (const auto& s : c32) keys.push_back(s.canonical().to_string());
    std::sort(keys.begin(), keys.end());
    CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());
    CHECK_THROWS_AS((void)catalog(kMaxCatalogFactors + 1, 0), SpecError);
    CHECK_THROWS_AS((void)catalog(1, kMaxCatalogDerivative + 1), SpecError);
    CHECK_THROWS_AS((void)catalog(0, 0), SpecError);
  }

  TEST_CASE("line format round trip") {
    CHECK(schemas::scalar_curvature().to_string() == "R|((0,3),(1,2))");
    CHECK(ContractionSchema::parse("R|((0,3),(1,2))") == schemas::scalar_curvature());
    for (const auto& s : catalog(2, 1)) CHECK(ContractionSchema::parse(s.to_string()) == s);
    for (const auto& s : random_schemas(100, 9)) CHECK(ContractionSchema::parse(s.to_string()) == s);
    CHECK_THROWS_AS((void)ContractionSchema::parse("R|((0,3))"), SpecError);
    CHECK_THROWS_AS((void)ContractionSchema::parse("R|((0,3),(3,2))"), SpecError);
    CHECK_THROWS_AS((void)ContractionSchema::parse("Q|((0,3),(1,2))"), ParseError);
    CHECK_THROWS_AS((void)ContractionSchema::parse("R,dR|((0,1))"), SpecError);
  }

  TEST_CASE("random schemas are deterministic in the seed") {
    CHECK(random_schemas(50, 1) == random_schemas(50, 1));
    CHECK_FALSE(random_schemas(50, 1) == random_schemas(50, 2));
    for (const auto& s : random_schemas(50, 1)) CHECK_NOTHROW(s.validate());
  }

  TEST_CASE("family invariants vanish and agree with the dense evaluator") {
    std::mt19937_64 rng(31);
    const auto params = FamilyParams::make(0, "exp(y)+exp(2*y)");
    for (int n = 0; n < 3; ++n) {
      CurvatureEngine e(build_metric(params), testing::random_point(rng, 6), 4);
      for (const auto& s : catalog(2, 1)) {
        const double sparse = evaluate(s, e);
        CHECK(std::abs(sparse) <= 1e-10 * contraction_scale(s, e));
        if (s.total_slots() <= 8) CHECK(evaluate_dense(s, e) == sparse);
      }
    }
  }

  TEST_CASE("flat metric invariants are zero") {
    CurvatureEngine e(testing::flat_neutral(), std::vector<double>(4, 0.0), 4);
    for (const auto& s : catalog(2, 2)) CHECK(evaluate(s, e) == 0.0);
  }

  TEST_CASE("sphere control values") {
    CurvatureEngine e(testing::round_sphere(), {1.2, 0.3}, 4);
    CHECK(evaluate(schemas::scalar_curvature(), e) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(evaluate(schemas::riemann_norm(), e) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(evaluate(schemas::ricci_norm(), e) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(evaluate(schemas::nabla_riemann_norm(), e)) <= 1e-12);
    CHECK(evaluate_dense(schemas::riemann_norm(), e) == doctest::Approx(4.0).epsilon(1e-12));
  }

  TEST_CASE("values do not depend on the chart") {
    CurvatureEngine round(testing::round_sphere(), {1.0 + 0.1, 0.4 - 1.0}, 4);
    CurvatureEngine sheared(testing::sheared_sphere(), {1.0, 0.4}, 4);
    for (const auto& s : catalog(3, 1)) {
      CHECK(std::abs(evaluate(s, round) - evaluate(s, sheared)) <= 1e-9 * contraction_scale(s, round));
    }
  }

  TEST_CASE("factor order and pair orientation do not change values") {
    CurvatureEngine e(lumpy(), {0.2, -0.3, 0.4}, 5);
    std::mt19937_64 rng(4);
    for (const auto& s : random_schemas(60, 77, 3, 2)) {
      std::vector<int> perm(s.factors.size());
      for (std::size_t q = 0; q < perm.size(); ++q) perm[q] = static_cast<int>(q);
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto t = permute_factors(s, perm);
      const double a = evaluate(s, e), b = evaluate(t, e);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
      CHECK(t.canonical() == s.canonical());
    }
  }

  TEST_CASE("sparse and dense evaluators agree on a generic metric") {
    CurvatureEngine e(lumpy(), {0.2, -0.3, 0.4}, 4);
    for (const auto& s : catalog(2, 1)) {
      if (s.total_slots() > 10) continue;
      const double a = evaluate(s, e), b = evaluate_dense(s, e);
      CHECK(std::abs(a - b) <= 1e-11 * contraction_scale(s, e));
    }
  }
}
