#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "kcurv/curvature.hpp"
#include "kcurv/error.hpp"
#include "kcurv/family.hpp"
#include "support.hpp"

using namespace kcurv;

namespace {

struct CorpusMetric {
  std::string name;
  MetricSpec spec;
  std::vector<double> center;
  double spread;
};

std::vector<CorpusMetric> corpus() {
  std::vector<CorpusMetric> out;
  for (int p : {-1, 0, 1}) {
    for (const char* f : {"exp(y)", "exp(y)+exp(2*y)", "y^8+y^9"}) {
      const auto params = FamilyParams::make(p, f);
      out.push_back({"p=" + std::to_string(p) + " f=" + f, build_metric(params),
                     std::vector<double>(static_cast<std::size_t>(params.dimension()), 0.0), 1.0});
    }
  }
  out.push_back({"sphere", testing::round_sphere(), {1.2, 0.3}, 0.5});
  out.push_back({"sheared sphere", testing::sheared_sphere(), {1.0, 0.4}, 0.4});
  out.push_back({"flat", testing::flat_neutral(), {0, 0, 0, 0}, 1.0});
  return out;
}

std::vector<double> near(std::mt19937_64& rng, const CorpusMetric& c) {
  auto p = testing::random_point(rng, c.center.size(), c.spread);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += c.center[i];
  return p;
}

}  // namespace

TEST_SUITE("geometry_core") {
  TEST_CASE("metric spec validation") {
    const auto params = FamilyParams::make(0, "exp(y)");
    const MetricSpec g = build_metric(params);
    CHECK(g.signature() == Signature{3, 3});
    const std::vector<double> origin(6, 0.0);
    const auto in = inertia(g.evaluate(origin));
    CHECK(in.negative == 3);
    CHECK(in.positive == 3);
    CHECK_NOTHROW(g.validate_at(origin));

    MetricSpec wrong({"a", "b"}, {1, 1});
    wrong.set_component(0, 0, "1");
    wrong.set_component(1, 1, "1");
    CHECK_THROWS_AS(wrong.validate_at(std::vector<double>{0, 0}), SpecError);

    MetricSpec singular({"a", "b"}, {0, 2});
    singular.set_component(0, 0, "1");
    singular.set_component(1, 1, "a^2");
    CHECK_THROWS_AS(singular.validate_at(std::vector<double>{0, 0}), NumericError);
    CHECK_THROWS_AS(CurvatureEngine(singular, {0, 0}, 2), NumericError);
  }

  TEST_CASE("metric spec JSON round trip") {
    const MetricSpec g = build_metric(FamilyParams::make(1, "exp(y)+exp(2*y)"));
    const MetricSpec h = MetricSpec::from_json(g.to_json());
    CHECK(h.coordinates() == g.coordinates());
    CHECK(h.signature() == g.signature());
    for (std::size_t i = 0; i < g.dimension(); ++i) {
      for (std::size_t j = 0; j < g.dimension(); ++j) CHECK(h.component(i, j) == g.component(i, j));
    }
    CHECK_THROWS_AS(MetricSpec::from_json("{\"coords\": [\"a\"]}"), SpecError);
    CHECK_THROWS_AS(MetricSpec::from_json("not json"), SpecError);
  }

  TEST_CASE("family metric components") {
    const auto params = FamilyParams::make(0, "exp(y)");
    const MetricSpec g = build_metric(params);
    const std::vector<double> pt{0, 0.5, 2.0, 0, 0, 0};
    const auto G = g.evaluate(pt);
    CHECK(G(0, 0) == doctest::Approx(-2 * (std::exp(0.5) + 0.5 * 2.0)));
    CHECK(G(0, 3) == 1.0);
    CHECK(G(1, 4) == 1.0);
    CHECK(G(2, 5) == 1.0);

    const MetricSpec g4 = build_metric(FamilyParams::make(-1, "exp(y)"));
    CHECK(g4.dimension() == 4);
    CHECK(g4.evaluate(std::vector<double>{0, 0.3, 0, 0})(0, 0) == doctest::Approx(-2 * std::exp(0.3)));
  }

  TEST_CASE("Christoffel symbols of the family") {
    const auto params = FamilyParams::make(0, "exp(y)");
    const FamilyIndex ix{0};
    const MetricSpec g = build_metric(params);
    const auto gamma = christoffel(g, std::vector<double>(6, 0.0), 1);
    CHECK(gamma({ix.x(), ix.x(), ix.yb()}) == doctest::Approx(1.0));
    CHECK(gamma({ix.x(), ix.z(0), ix.xb()}) == doctest::Approx(0.0));
    const auto at_y1 = christoffel(g, std::vector<double>{0, 1, 0, 0, 0, 0}, 1);
    CHECK(at_y1({ix.x(), ix.z(0), ix.xb()}) == doctest::Approx(-1.0));
    // No Christoffel symbol has a barred lower index.
    for (int a = 0; a < 6; ++a) {
      for (int b : {ix.xb(), ix.yb(), ix.zb(0)}) {
        for (int c = 0; c < 6; ++c) CHECK(gamma({a, b, c}) == 0.0);
      }
    }

    const auto flat = christoffel(testing::flat_neutral(), std::vector<double>(4, 0.3), 1);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c) CHECK(flat({a, b, c}) == 0.0);
  }

  TEST_CASE("Riemann tensor examples") {
    const FamilyIndex i0{0};
    const auto r0 = riemann(build_metric(FamilyParams::make(0, "exp(y)")), std::vector<double>(6, 0.0));
    CHECK(r0({i0.x(), i0.y(), i0.y(), i0.x()}) == doctest::Approx(1.0));
    CHECK(r0({i0.x(), i0.y(), i0.z(0), i0.x()}) == doctest::Approx(1.0));
    std::size_t independent = 0;
    for (const auto& e : r0.nonzero_components(1e-14)) {
      const auto& s = e.slots;
      if (s[0] < s[1] && s[2] > s[3] && std::pair(s[0], s[1]) <= std::pair(s[3], s[2])) ++independent;
    }
    CHECK(independent == 2);

    const FamilyIndex i1{1};
    std::vector<double> pt(8, 0.0);
    pt[1] = 2.0;
    const auto r1 = riemann(build_metric(FamilyParams::make(1, "exp(y)")), pt);
    CHECK(r1({i1.x(), i1.y(), i1.y(), i1.x()}) == doctest::Approx(std::exp(2.0)).epsilon(1e-13));
    CHECK(r1({i1.x(), i1.y(), i1.z(1), i1.x()}) == doctest::Approx(4.0).epsilon(1e-13));

    const auto rf = riemann(testing::flat_neutral(), std::vector<double>(4, 0.0));
    CHECK(rf.nonzero_components().empty());
  }

  TEST_CASE("covariant derivatives and jet order bookkeeping") {
    for (int p = 0; p <= 2; ++p) {
      const auto params = FamilyParams::make(p, "exp(y)+exp(2*y)");
      const FamilyIndex ix{p};
      std::mt19937_64 rng(40 + static_cast<unsigned>(p));
      const auto pt = testing::random_point(rng, static_cast<std::size_t>(params.dimension()));
      auto e = CurvatureEngine::for_derivative_order(build_metric(params), pt, p);
      double fact = 1.0;
      for (int k = 0; k <= p; ++k) {
        fact *= (k + 1);
        for (int i = 0; i <= k; ++i) {
          std::vector<int> slots{ix.x(), ix.y(), ix.z(i), ix.x()};
          slots.insert(slots.end(), static_cast<std::size_t>(k), ix.y());
          CHECK(e.curvature(slots) == doctest::Approx(i == k ? fact : 0.0).epsilon(1e-10).scale(1.0));
        }
      }
    }

    const auto n3 = nabla_k_R(build_metric(FamilyParams::make(0, "exp(y)")), std::vector<double>(6, 0.0), 3);
    CHECK(n3({0, 1, 1, 0, 1, 1, 1}) == doctest::Approx(1.0));

    auto e = CurvatureEngine(build_metric(FamilyParams::make(0, "exp(y)")), std::vector<double>(6, 0.0), 3);
    CHECK(e.max_derivative_order() == 1);
    CHECK_THROWS_AS((void)e.curvature(std::vector<int>{0, 1, 1, 0, 1, 1}), SpecError);
    // k = 0 reduces to the Riemann tensor.
    CHECK(e.curvature(std::vector<int>{0, 1, 1, 0}) == e.riemann(0, 1, 1, 0));
  }

  TEST_CASE("Ricci tensor and scalar curvature") {
    std::mt19937_64 rng(2);
    for (int p : {-1, 0, 1, 2}) {
      const auto params = FamilyParams::make(p, "exp(y)+exp(2*y)");
      const auto pt = testing::random_point(rng, static_cast<std::size_t>(params.dimension()));
      CurvatureEngine e(build_metric(params), pt, 2);
      CHECK(ricci(e).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(std::abs(scalar_curvature(e)) <= 1e-12);
    }
    CurvatureEngine flat(testing::flat_neutral(), std::vector<double>(4, 0.0), 2);
    CHECK(scalar_curvature(flat) == 0.0);
    CurvatureEngine sphere(testing::round_sphere(), {1.1, 0.2}, 2);
    CHECK(scalar_curvature(sphere) == doctest::Approx(2.0).epsilon(1e-12));
    const auto rho = ricci(sphere);
    CHECK(rho(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rho(1, 1) == doctest::Approx(std::pow(std::sin(1.1), 2)).epsilon(1e-12));
  }

  TEST_CASE("curvature operators") {
    CurvatureEngine sphere(testing::round_sphere(), {1.1, 0.2}, 2);
    Eigen::VectorXd dth(2), dph(2);
    dth << 1, 0;
    dph << 0, 1;
    const auto J = jacobi_operator(sphere, dth).matrix;
    const Eigen::VectorXd Jph = J * dph;
    CHECK(Jph(0) == doctest::Approx(0.0).scale(1.0));
    CHECK(Jph(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((J * dth).norm() <= 1e-12);
    CHECK(jacobi_operator(sphere, Eigen::VectorXd::Zero(2)).matrix.norm() == 0.0);

    const auto params = FamilyParams::make(1, "exp(y)");
    const FamilyIndex ix{1};
    CurvatureEngine e(build_metric(params), std::vector<double>(8, 0.1), 2);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(8), b = Eigen::VectorXd::Zero(8);
    a(ix.xb()) = 1;
    b(ix.yb()) = 1;
    CHECK_THROWS_AS((void)skew_curvature_operator(e, a, b), NumericError);
  }

  TEST_CASE("Jacobi operators are self-adjoint") {
    std::mt19937_64 rng(12);
    for (const auto& c : corpus()) {
      INFO(c.name);
      CurvatureEngine e(c.spec, near(rng, c), 2);
      const auto n = static_cast<Eigen::Index>(c.spec.dimension());
      for (int s = 0; s < 10; ++s) {
        const auto J = jacobi_operator(e, testing::random_vector(rng, n)).matrix;
        const auto y = testing::random_vector(rng, n), z = testing::random_vector(rng, n);
        const double lhs = (J * y).dot(e.metric() * z);
        const double rhs = y.dot(e.metric() * (J * z));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
      }
    }
  }

  TEST_CASE("algebraic symmetries and first Bianchi identity") {
    std::mt19937_64 rng(13);
    for (const auto& c : corpus()) {
      INFO(c.name);
      const int m = static_cast<int>(c.spec.dimension());
      double worst = 0.0;
      for (int n = 0; n < 100; ++n) {
        CurvatureEngine e(c.spec, near(rng, c), 2);
        const double scale = std::max(1.0, e.max_abs_component(0));
        std::uniform_int_distribution<int> d(0, m - 1);
        for (int s = 0; s < 40; ++s) {
          const int i = d(rng), j = d(rng), k = d(rng), l = d(rng);
          const double r = e.riemann(i, j, k, l);
          worst = std::max({worst, std::abs(r + e.riemann(j, i, k, l)) / scale, std::abs(r + e.riemann(i, j, l, k)) / scale,
                            std::abs(r - e.riemann(k, l, i, j)) / scale,
                            std::abs(r + e.riemann(i, k, l, j) + e.riemann(i, l, j, k)) / scale});
        }
      }
      CHECK(worst <= 1e-10);
    }
  }

  TEST_CASE("second Bianchi identity") {
    std::mt19937_64 rng(14);
    for (const auto& c : corpus()) {
      INFO(c.name);
      const int m = static_cast<int>(c.spec.dimension());
      std::uniform_int_distribution<int> d(0, m - 1);
      for (int n = 0; n < 10; ++n) {
        CurvatureEngine e(c.spec, near(rng, c), 3);
        const double scale = std::max(1.0, e.max_abs_component(1));
        for (int s = 0; s < 100; ++s) {
          const int i = d(rng), j = d(rng), k = d(rng), l = d(rng), q = d(rng);
          const std::array<int, 5> a{i, j, k, l, q}, b{i, j, l, q, k}, cc{i, j, q, k, l};
          CHECK(std::abs(e.curvature(a) + e.curvature(b) + e.curvature(cc)) <= 1e-10 * scale);
        }
      }
    }
  }

  TEST_CASE("barred directions are isotropic for every derivative level") {
    std::mt19937_64 rng(15);
    for (int p : {-1, 0, 1, 2}) {
      const auto params = FamilyParams::make(p, "y^8+y^9");
      const int m = params.dimension();
      CurvatureEngine e(build_metric(params), testing::random_point(rng, static_cast<std::size_t>(m)), 4);
      for (int k = 0; k <= 2; ++k) {
        for (const auto& slots : e.support(k)) {
          for (int s : slots) CHECK(s < m / 2);
        }
      }
    }
  }

  TEST_CASE("second derivatives commute on the family") {
    std::mt19937_64 rng(16);
    for (int p : {0, 1}) {
      const auto params = FamilyParams::make(p, "exp(y)+exp(2*y)");
      const int m = params.dimension();
      CurvatureEngine e(build_metric(params), testing::random_point(rng, static_cast<std::size_t>(m)), 4);
      std::uniform_int_distribution<int> d(0, m - 1);
      for (int s = 0; s < 2000; ++s) {
        std::array<int, 6> a{d(rng), d(rng), d(rng), d(rng), d(rng), d(rng)};
        std::array<int, 6> b = a;
        std::swap(b[4], b[5]);
        CHECK(std::abs(e.curvature(a) - e.curvature(b)) <= 1e-10);
      }
    }
  }

  TEST_CASE("component values do not depend on access order") {
    const auto params = FamilyParams::make(1, "exp(y)+exp(2*y)");
    const std::vector<double> pt{0.1, -0.3, 0.2, 0.5, 0.0, 0.0, 0.0, 0.0};
    CurvatureEngine warm(build_metric(params), pt, 4);
    const auto& support = warm.support(2);
    std::vector<double> forward;
    for (const auto& s : support) forward.push_back(warm.curvature(s));
    CurvatureEngine cold(build_metric(params), pt, 4);
    for (std::size_t q = support.size(); q-- > 0;) CHECK(cold.curvature(support[q]) == forward[q]);
  }

  TEST_CASE("triangularity probe") {
    const auto params = FamilyParams::make(1, "exp(y)");
    const FamilyIndex ix{1};
    CurvatureEngine e(build_metric(params), std::vector<double>{0.2, 0.4, -0.1, 0.3, 1, 2, 3, 4}, 2);
    const std::vector<int> v{ix.x(), ix.y(), ix.z(0), ix.z(1)};
    const std::vector<int> vb{ix.xb(), ix.yb(), ix.zb(0), ix.zb(1)};
    CHECK(triangularity_probe(e, v, vb));
    CHECK_FALSE(triangularity_probe(e, vb, v));

    CurvatureEngine flat(testing::flat_neutral(), std::vector<double>(4, 0.0), 2);
    CHECK(triangularity_probe(flat, std::vector<int>{0, 1}, std::vector<int>{2, 3}));
    CHECK(triangularity_probe(flat, std::vector<int>{2}, std::vector<int>{0, 1, 3}));

    CurvatureEngine sphere(testing::round_sphere(), {1.1, 0.2}, 2);
    CHECK_FALSE(triangularity_probe(sphere, std::vector<int>{0}, std::vector<int>{1}));
    CHECK_FALSE(triangularity_probe(sphere, std::vector<int>{1}, std::vector<int>{0}));
  }
}
