#pragma once

// Geodesics: adaptive Runge-Kutta for the initial value problem, and the
// successive-quadrature solver for connections whose Christoffel symbols are
// triangular in some coordinate ordering.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcurv/expr.hpp"
#include "kcurv/metric.hpp"

namespace kcurv {

struct GeodesicControls {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  double initial_step = 1e-3;
  double min_step = 1e-13;
  std::size_t max_steps = 50'000'000;
  double quadrature_tol = 1e-10;
};

struct GeodesicProblem {
  MetricSpec spec;
  std::vector<double> start;
  std::optional<std::vector<double>> velocity;  // initial value problem
  std::optional<std::vector<double>> target;    // boundary value problem, gamma(1) = target
  double horizon = 1.0;
  int samples = 101;
  GeodesicControls controls;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> positions;
  std::vector<std::vector<double>> velocities;
  std::string method;
  std::size_t steps = 0;  // accepted RK steps, or quadrature leaves
};

/// Pointwise Christoffel symbols and geodesic acceleration from first
/// derivatives of the metric components.
class ChristoffelField {
 public:
  explicit ChristoffelField(const MetricSpec& spec);

  std::size_t dimension() const noexcept { return m_; }
  /// Gamma_{ab}^c at u, stored at (a * m + b) * m + c.
  std::vector<double> christoffel(std::span<const double> u) const;
  /// out_c = -sum_ab Gamma_{ab}^c v_a v_b.
  void acceleration(std::span<const double> u, std::span<const double> v, std::span<double> out) const;

 private:
  struct Component {
    std::size_t i, j;
    Expr expr;
  };
  void gradients(std::span<const double> u, Eigen::MatrixXd& g, std::vector<Eigen::VectorXd>& grad) const;

  std::size_t m_;
  JetChart chart_;
  std::vector<Component> varying_;
  Eigen::MatrixXd constant_part_;
};

/// dopri5 with error control; samples at `problem.samples` equally spaced
/// times. Throws NumericError on step-size collapse, naming the time reached.
Trajectory integrate_ivp(const GeodesicProblem& problem);

/// Checks, at every point in `probes`, that Gamma_{ab}^c != 0 only when a and b
/// come before c in `ordering` and that Gamma_{ab}^c does not depend on c or any
/// later coordinate. `ordering[n]` is the chart index of u_{n+1}.
bool triangular_ordering_holds(const MetricSpec& spec, std::span<const int> ordering,
                               std::span<const std::vector<double>> probes, double tolerance = 1e-12);

/// Successive quadrature along `ordering`; handles both IVP and BVP. Throws
/// PreconditionError when the ordering fails the probe at the start point,
/// the target and `probe_count` seeded random points around them.
Trajectory triangular_solve(const GeodesicProblem& problem, std::span<const int> ordering, int probe_count = 8,
                            std::uint64_t probe_seed = 7);

/// Triangular solve when the ordering passes the probe, dopri5 otherwise (IVP only).
Trajectory solve_geodesic(const GeodesicProblem& problem, std::optional<std::vector<int>> ordering);

std::vector<double> exp_map(const MetricSpec& spec, std::span<const double> p, std::span<const double> v,
                            const GeodesicControls& controls = {});
/// Initial velocity of the geodesic from p to q, from the triangular BVP formula.
std::vector<double> log_map(const MetricSpec& spec, std::span<const double> p, std::span<const double> q,
                            std::span<const int> ordering, const GeodesicControls& controls = {});

/// g(gamma', gamma') at every sample.
std::vector<double> energy(const MetricSpec& spec, const Trajectory& trajectory);

/// Header `t,u_1,...,u_n,du_1,...,du_n`, one row per sample.
void write_csv(std::ostream& out, const Trajectory& trajectory);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

}  // namespace kcurv
