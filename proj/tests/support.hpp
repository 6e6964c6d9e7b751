#pragma once

// Shared oracles and generators for the unit and acceptance tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "kcurv/expr.hpp"
#include "kcurv/family.hpp"

namespace kcurv::testing {

inline const std::vector<std::string>& corpus_chart() {
  static const std::vector<std::string> chart{"a", "b", "c"};
  return chart;
}

/// Random expression tree over corpus_chart() with bounded depth. Literals are
/// dyadic so printing and re-parsing cannot lose bits.
inline Expr random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 8);
  std::uniform_int_distribution<int> var(0, 2);
  std::uniform_int_distribution<int> lit(1, 16);
  const auto& chart = corpus_chart();
  switch (pick(rng)) {
    case 0:
      return Expr::constant(lit(rng) / 8.0);
    case 1: {
      const int v = var(rng);
      return Expr::variable(chart[static_cast<std::size_t>(v)], static_cast<std::size_t>(v));
    }
    case 2:
      return Expr::sum({random_expr(rng, depth - 1), random_expr(rng, depth - 1)});
    case 3:
      return Expr::sum({random_expr(rng, depth - 1), Expr::negate(random_expr(rng, depth - 1))});
    case 4:
      return Expr::product({random_expr(rng, depth - 1), random_expr(rng, depth - 1)});
    case 5:
      return Expr::power(random_expr(rng, depth - 1), static_cast<unsigned>(std::uniform_int_distribution<int>(2, 3)(rng)));
    case 6:
      return Expr::exp(Expr::product({Expr::constant(0.5), random_expr(rng, depth - 1)}));
    case 7:
      return Expr::sin(random_expr(rng, depth - 1));
    default:
      return Expr::cos(random_expr(rng, depth - 1));
  }
}

/// Central finite-difference estimate of d^m e at `point`, in long double.
/// Stencils per variable: order 1 and 2 on {-h, 0, h}, order 3 on {-2h..2h}.
inline long double fd_partial(const Expr& e, const std::vector<double>& point, const std::vector<int>& m,
                              long double h = 1e-4L) {
  struct Tap {
    int offset;
    long double weight;
  };
  const auto stencil = [&](int order) -> std::vector<Tap> {
    switch (order) {
      case 0:
        return {{0, 1.0L}};
      case 1:
        return {{-1, -0.5L / h}, {1, 0.5L / h}};
      case 2:
        return {{-1, 1.0L / (h * h)}, {0, -2.0L / (h * h)}, {1, 1.0L / (h * h)}};
      default:
        return {{-2, -0.5L / (h * h * h)}, {-1, 1.0L / (h * h * h)}, {1, -1.0L / (h * h * h)}, {2, 0.5L / (h * h * h)}};
    }
  };
  std::vector<std::vector<Tap>> taps;
  for (int o : m) taps.push_back(stencil(o));
  std::vector<long double> x(point.begin(), point.end());
  long double total = 0.0L;
  std::vector<std::size_t> at(m.size(), 0);
  while (true) {
    long double w = 1.0L;
    std::vector<long double> p = x;
    for (std::size_t v = 0; v < m.size(); ++v) {
      const auto& t = taps[v][at[v]];
      p[v] += t.offset * h;
      w *= t.weight;
    }
    total += w * evaluate<long double>(e, p);
    std::size_t v = 0;
    while (v < m.size() && ++at[v] == taps[v].size()) at[v++] = 0;
    if (v == m.size()) break;
  }
  return total;
}

/// Evenly spread pseudo-random point in [-r, r]^n.
inline std::vector<double> random_point(std::mt19937_64& rng, std::size_t n, double r = 1.0) {
  std::uniform_real_distribution<double> d(-r, r);
  std::vector<double> p(n);
  for (double& v : p) v = d(rng);
  return p;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double r = 1.0) {
  std::uniform_real_distribution<double> d(-r, r);
  Eigen::VectorXd v(n);
  for (Eigen::Index q = 0; q < n; ++q) v(q) = d(rng);
  return v;
}

inline std::vector<int> identity_ordering(std::size_t m) {
  std::vector<int> o(m);
  for (std::size_t q = 0; q < m; ++q) o[q] = static_cast<int>(q);
  return o;
}

/// Unit 2-sphere, dth^2 + sin(th)^2 dph^2.
inline MetricSpec round_sphere() {
  MetricSpec s({"th", "ph"}, {0, 2});
  s.set_component(0, 0, "1");
  s.set_component(1, 1, "sin(th)^2");
  return s;
}

/// The same sphere in the chart th = s + s^3/10, ph = psi - s^2.
inline MetricSpec sheared_sphere() {
  MetricSpec s({"s", "psi"}, {0, 2});
  s.set_component(0, 0, "(1 + 0.3*s^2)^2 + 4*s^2*sin(s + 0.1*s^3)^2");
  s.set_component(0, 1, "-2*s*sin(s + 0.1*s^3)^2");
  s.set_component(1, 1, "sin(s + 0.1*s^3)^2");
  return s;
}

inline MetricSpec flat_neutral() {
  MetricSpec s({"t", "u", "v", "w"}, {2, 2});
  s.set_component(0, 2, "1");
  s.set_component(1, 3, "1");
  return s;
}

}  // namespace kcurv::testing
