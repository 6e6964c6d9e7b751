#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "kcurv/error.hpp"
#include "kcurv/family.hpp"
#include "kcurv/geodesic.hpp"
#include "support.hpp"

using namespace kcurv;

namespace {

double sup_distance(const Trajectory& a, const Trajectory& b) {
  double d = 0.0;
  for (std::size_t r = 0; r < a.times.size(); ++r) {
    for (std::size_t c = 0; c < a.positions[r].size(); ++c) {
      d = std::max({d, std::abs(a.positions[r][c] - b.positions[r][c]),
                    std::abs(a.velocities[r][c] - b.velocities[r][c])});
    }
  }
  return d;
}

double drift(const MetricSpec& g, const Trajectory& t) {
  const auto e = energy(g, t);
  double d = 0.0;
  for (double v : e) d = std::max(d, std::abs(v - e.front()));
  return d;
}

}  // namespace

TEST_SUITE("geodesics") {
  TEST_CASE("flat space geodesics are straight lines") {
    const MetricSpec g = testing::flat_neutral();
    const std::vector<double> P{1, 2, 3, 4}, v{0.5, -1, 2, 0.25};
    const auto tr = integrate_ivp({g, P, v, std::nullopt, 3.0, 7, {}});
    for (std::size_t r = 0; r < tr.times.size(); ++r) {
      for (std::size_t c = 0; c < 4; ++c) CHECK(tr.positions[r][c] == doctest::Approx(P[c] + tr.times[r] * v[c]).epsilon(1e-12));
    }
    const std::vector<int> any{3, 1, 0, 2};
    const auto tri = triangular_solve({g, P, v, std::nullopt, 3.0, 7, {}}, any);
    CHECK(sup_distance(tr, tri) <= 1e-12);
    const std::vector<double> Q{-1, 0, 5, 2};
    const auto u = log_map(g, P, Q, any);
    for (std::size_t c = 0; c < 4; ++c) CHECK(u[c] == doctest::Approx(Q[c] - P[c]).epsilon(1e-14));
    const auto same = exp_map(g, P, std::vector<double>(4, 0.0));
    CHECK(same == P);
  }

  TEST_CASE("barred directions move in straight lines") {
    const auto params = FamilyParams::make(1, "exp(y)+exp(2*y)");
    const FamilyIndex ix{1};
    const std::vector<double> P{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    std::vector<double> v(8, 0.0);
    v[static_cast<std::size_t>(ix.yb())] = 1.0;
    const auto tr = integrate_ivp({build_metric(params), P, v, std::nullopt, 5.0, 11, {}});
    for (std::size_t r = 0; r < tr.times.size(); ++r) {
      for (std::size_t c = 0; c < 8; ++c) CHECK(tr.positions[r][c] == doctest::Approx(P[c] + tr.times[r] * v[c]).epsilon(1e-12));
    }
  }

  TEST_CASE("the two solvers agree on the family") {
    const auto params = FamilyParams::make(0, "exp(y)");
    const MetricSpec g = build_metric(params);
    std::vector<double> v(6, 0.0);
    v[0] = 1.0;
    const GeodesicProblem pb{g, std::vector<double>(6, 0.0), v, std::nullopt, 10.0, 101, {}};
    const auto a = integrate_ivp(pb);
    const auto b = triangular_solve(pb, testing::identity_ordering(6));
    CHECK(a.method == "dopri5");
    CHECK(b.method == "triangular");
    CHECK(sup_distance(a, b) <= 1e-6);

    std::mt19937_64 rng(61);
    for (int p : {-1, 1, 2}) {
      const auto pp = FamilyParams::make(p, "exp(y)+exp(2*y)");
      const auto m = static_cast<std::size_t>(pp.dimension());
      const GeodesicProblem q{build_metric(pp), testing::random_point(rng, m), testing::random_point(rng, m, 0.3),
                              std::nullopt, 10.0, 51, {}};
      CHECK(sup_distance(integrate_ivp(q), triangular_solve(q, testing::identity_ordering(m))) <= 1e-6);
    }
  }

  TEST_CASE("energy is conserved") {
    std::mt19937_64 rng(62);
    std::vector<std::pair<MetricSpec, std::vector<double>>> cases;
    for (int p : {-1, 0, 1}) {
      for (const char* f : {"exp(y)", "exp(y)+exp(2*y)", "y^8+y^9"}) {
        const auto params = FamilyParams::make(p, f);
        cases.emplace_back(build_metric(params), testing::random_point(rng, static_cast<std::size_t>(params.dimension()), 0.5));
      }
    }
    cases.emplace_back(testing::round_sphere(), std::vector<double>{1.2, 0.3});
    cases.emplace_back(testing::sheared_sphere(), std::vector<double>{1.0, 0.4});
    cases.emplace_back(testing::flat_neutral(), std::vector<double>{0, 0, 0, 0});
    for (const auto& [g, P] : cases) {
      // The sphere chart degenerates at th = 0, so its velocities stay small.
      const double speed = g.dimension() == 2 ? 0.02 : 0.1;
      const auto v = testing::random_point(rng, g.dimension(), speed);
      const auto tr = integrate_ivp({g, P, v, std::nullopt, 10.0, 41, {}});
      CHECK(drift(g, tr) <= 1e-8);
    }
  }

  TEST_CASE("integrating backwards retraces the trajectory") {
    const auto params = FamilyParams::make(1, "exp(y)+exp(2*y)");
    const MetricSpec g = build_metric(params);
    std::mt19937_64 rng(63);
    const auto P = testing::random_point(rng, 8);
    const auto fwd = integrate_ivp({g, P, testing::random_point(rng, 8, 0.3), std::nullopt, 10.0, 11, {}});
    std::vector<double> back_v = fwd.velocities.back();
    for (double& x : back_v) x = -x;
    const auto bwd = integrate_ivp({g, fwd.positions.back(), back_v, std::nullopt, 10.0, 11, {}});
    for (std::size_t r = 0; r < fwd.times.size(); ++r) {
      const auto& a = fwd.positions[r];
      const auto& b = bwd.positions[fwd.times.size() - 1 - r];
      for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(a[c] - b[c]) <= 1e-7);
    }
  }

  TEST_CASE("samples satisfy the geodesic equation") {
    const auto params = FamilyParams::make(0, "exp(y)+exp(2*y)");
    const MetricSpec g = build_metric(params);
    const ChristoffelField field(g);
    const std::vector<double> P{0.1, 0.2, -0.3, 0.4, 0.5, 0.6}, v{0.3, 0.2, -0.1, 0.4, 0.1, -0.2};
    const auto tr = integrate_ivp({g, P, v, std::nullopt, 2.0, 2001, {}});
    const double dt = tr.times[1] - tr.times[0];
    std::vector<double> acc(6);
    for (std::size_t r = 1; r + 1 < tr.times.size(); r += 50) {
      field.acceleration(tr.positions[r], tr.velocities[r], acc);
      for (std::size_t c = 0; c < 6; ++c) {
        const double fd = (tr.velocities[r + 1][c] - tr.velocities[r - 1][c]) / (2 * dt);
        CHECK(std::abs(fd - acc[c]) <= 1e-5 * std::max(1.0, std::abs(acc[c])));
      }
    }
  }

  TEST_CASE("boundary value problems through the log map") {
    const auto params = FamilyParams::make(1, "exp(y)+exp(2*y)");
    const MetricSpec g = build_metric(params);
    const auto order = testing::identity_ordering(8);
    std::mt19937_64 rng(64);
    for (int n = 0; n < 20; ++n) {
      const auto P = testing::random_point(rng, 8), Q = testing::random_point(rng, 8);
      const auto u = log_map(g, P, Q, order);
      const auto R = exp_map(g, P, u);
      for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(R[c] - Q[c]) <= 1e-8);
    }

    const auto P = testing::random_point(rng, 8), Q = testing::random_point(rng, 8);
    GeodesicControls loose, tight;
    loose.quadrature_tol = 1e-8;
    tight.quadrature_tol = 1e-12;
    const auto u1 = log_map(g, P, Q, order, loose), u2 = log_map(g, P, Q, order, tight);
    for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(u1[c] - u2[c]) <= 1e-6);

    const auto bvp = triangular_solve({g, P, std::nullopt, Q, 1.0, 11, {}}, order);
    for (std::size_t c = 0; c < 8; ++c) {
      CHECK(bvp.positions.front()[c] == P[c]);
      CHECK(std::abs(bvp.positions.back()[c] - Q[c]) <= 1e-12);
    }
  }

  TEST_CASE("orderings that are not triangular are rejected") {
    const auto params = FamilyParams::make(0, "exp(y)");
    const MetricSpec g = build_metric(params);
    const std::vector<int> reversed{5, 4, 3, 2, 1, 0};
    std::vector<double> v(6, 0.1);
    const GeodesicProblem pb{g, std::vector<double>(6, 0.0), v, std::nullopt, 1.0, 11, {}};
    CHECK_THROWS_AS((void)triangular_solve(pb, reversed), PreconditionError);
    CHECK(solve_geodesic(pb, reversed).method == "dopri5");
    CHECK(solve_geodesic(pb, testing::identity_ordering(6)).method == "triangular");

    const MetricSpec s = testing::round_sphere();
    const std::vector<double> P{1.2, 0.3}, Q{1.0, 0.5};
    CHECK_THROWS_AS((void)log_map(s, P, Q, std::vector<int>{0, 1}), PreconditionError);
    CHECK_THROWS_AS((void)log_map(s, P, Q, std::vector<int>{1, 0}), PreconditionError);
    CHECK_THROWS_AS((void)triangular_solve(pb, std::vector<int>{0, 0, 1, 2, 3, 4}), SpecError);
  }

  TEST_CASE("malformed problems") {
    const MetricSpec g = testing::flat_neutral();
    const std::vector<double> P(4, 0.0);
    CHECK_THROWS_AS((void)integrate_ivp({g, P, std::nullopt, std::nullopt, 1.0, 11, {}}), SpecError);
    CHECK_THROWS_AS((void)integrate_ivp({g, P, P, P, 1.0, 11, {}}), SpecError);
    CHECK_THROWS_AS((void)integrate_ivp({g, P, P, std::nullopt, 0.0, 11, {}}), SpecError);
    CHECK_THROWS_AS((void)integrate_ivp({g, P, P, std::nullopt, 1.0, 1, {}}), SpecError);
    CHECK_THROWS_AS((void)integrate_ivp({g, {0, 0}, P, std::nullopt, 1.0, 11, {}}), SpecError);
    GeodesicControls bad;
    bad.abs_tol = 0;
    CHECK_THROWS_AS((void)integrate_ivp({g, P, P, std::nullopt, 1.0, 11, bad}), SpecError);
  }

  TEST_CASE("step collapse reports the time reached") {
    MetricSpec g({"x"}, {0, 1});
    g.set_component(0, 0, "exp(-2*x^2)");
    try {
      (void)integrate_ivp({g, {1.0}, std::vector<double>{1.0}, std::nullopt, 10.0, 11, {}});
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      const std::string what = e.what();
      CHECK(what.find("t = 0.3") != std::string::npos);
    }
  }

  TEST_CASE("long horizon probe") {
    const auto params = FamilyParams::make(0, "exp(y)+exp(2*y)");
    const std::vector<double> v{1.0, 0.004, -0.5, 0.2, 0.3, 0.1};
    const auto tr = integrate_ivp({build_metric(params), std::vector<double>(6, 0.0), v, std::nullopt, 1000.0, 11, {}});
    CHECK(tr.times.back() == 1000.0);
    for (double x : tr.positions.back()) CHECK(std::isfinite(x));
  }

  TEST_CASE("CSV export") {
    Trajectory t;
    t.times = {0.0, 0.5};
    t.positions = {{1.0, 2.0}, {1.5, 2.25}};
    t.velocities = {{1.0, 0.5}, {1.0, 0.5}};
    std::ostringstream os;
    write_csv(os, t);
    CHECK(os.str() == "t,u_1,u_2,du_1,du_2\n0,1,2,1,0.5\n0.5,1.5,2.25,1,0.5\n");
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  }
}
