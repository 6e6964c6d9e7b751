#include "kcurv/geodesic.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "kcurv/curvature.hpp"
#include "kcurv/error.hpp"

namespace kcurv {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw NumericError("cannot format number");
  return std::string(buf.data(), ptr);
}

// ---------------------------------------------------------------------------

ChristoffelField::ChristoffelField(const MetricSpec& spec)
    : m_(spec.dimension()), constant_part_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_))) {
  const auto& deps = spec.dependency_indices();
  chart_ = make_jet_chart(spec.coordinates(), std::span<const std::size_t>(deps));
  for (std::size_t i = 0; i < m_; ++i) {
    for (std::size_t j = i; j < m_; ++j) {
      const Expr& e = spec.component(i, j);
      if (e.kind() == Expr::Kind::Constant) {
        constant_part_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e.value();
        constant_part_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = e.value();
      } else {
        varying_.push_back({i, j, e});
      }
    }
  }
}

void ChristoffelField::gradients(std::span<const double> u, Eigen::MatrixXd& g, std::vector<Eigen::VectorXd>& grad) const {
  if (u.size() != m_) throw SpecError("point has the wrong dimension");
  g = constant_part_;
  grad.assign(varying_.size(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_)));
  for (std::size_t q = 0; q < varying_.size(); ++q) {
    const auto& c = varying_[q];
    const Jet j = eval_jet(c.expr, u, chart_, 1);
    const auto i = static_cast<Eigen::Index>(c.i), k = static_cast<Eigen::Index>(c.j);
    g(i, k) = j.value();
    g(k, i) = j.value();
    const auto coeffs = j.coefficients();
    for (std::size_t v = 0; v < chart_.chart_indices.size(); ++v) {
      grad[q](static_cast<Eigen::Index>(chart_.chart_indices[v])) = coeffs[1 + v];
    }
  }
}

std::vector<double> ChristoffelField::christoffel(std::span<const double> u) const {
  Eigen::MatrixXd g;
  std::vector<Eigen::VectorXd> grad;
  gradients(u, g, grad);
  const auto m = static_cast<Eigen::Index>(m_);
  // dg[x](a, b) = d_x g_ab
  std::vector<Eigen::MatrixXd> dg(m_, Eigen::MatrixXd::Zero(m, m));
  for (std::size_t q = 0; q < varying_.size(); ++q) {
    const auto i = static_cast<Eigen::Index>(varying_[q].i), k = static_cast<Eigen::Index>(varying_[q].j);
    for (Eigen::Index x = 0; x < m; ++x) {
      dg[static_cast<std::size_t>(x)](i, k) = grad[q](x);
      dg[static_cast<std::size_t>(x)](k, i) = grad[q](x);
    }
  }
  const Eigen::MatrixXd gi = g.partialPivLu().inverse();
  std::vector<double> out(m_ * m_ * m_, 0.0);
  Eigen::VectorXd first(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      for (Eigen::Index c = 0; c < m; ++c) {
        first(c) = 0.5 * (dg[static_cast<std::size_t>(a)](b, c) + dg[static_cast<std::size_t>(b)](a, c) -
                          dg[static_cast<std::size_t>(c)](a, b));
      }
      const Eigen::VectorXd second = gi * first;
      for (Eigen::Index c = 0; c < m; ++c) {
        out[(static_cast<std::size_t>(a) * m_ + static_cast<std::size_t>(b)) * m_ + static_cast<std::size_t>(c)] = second(c);
      }
    }
  }
  return out;
}

void ChristoffelField::acceleration(std::span<const double> u, std::span<const double> v, std::span<double> out) const {
  Eigen::MatrixXd g;
  std::vector<Eigen::VectorXd> grad;
  gradients(u, g, grad);
  const auto m = static_cast<Eigen::Index>(m_);
  const Eigen::Map<const Eigen::VectorXd> vel(v.data(), m);
  // w_c = sum_ab Gamma_abc v^a v^b = sum_b (D_v g)_cb v^b - 1/2 sum_ab d_c g_ab v^a v^b
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  for (std::size_t q = 0; q < varying_.size(); ++q) {
    const auto i = static_cast<Eigen::Index>(varying_[q].i), k = static_cast<Eigen::Index>(varying_[q].j);
    const double dv = grad[q].dot(vel);
    const double pair = (i == k) ? vel(i) * vel(k) : 2.0 * vel(i) * vel(k);
    w(i) += dv * vel(k);
    if (i != k) w(k) += dv * vel(i);
    w -= 0.5 * pair * grad[q];
  }
  const Eigen::VectorXd acc = -g.partialPivLu().solve(w);
  for (Eigen::Index c = 0; c < m; ++c) out[static_cast<std::size_t>(c)] = acc(c);
}

// ---------------------------------------------------------------------------

namespace {

void check_problem(const GeodesicProblem& pb) {
  const auto m = pb.spec.dimension();
  if (pb.start.size() != m) throw SpecError("start point has the wrong dimension");
  if (!(pb.horizon > 0.0) || !std::isfinite(pb.horizon)) throw SpecError("time horizon must be finite and positive");
  if (pb.samples < 2) throw SpecError("a trajectory needs at least two samples");
  const auto& c = pb.controls;
  if (!(c.abs_tol > 0) || !(c.rel_tol > 0) || !(c.initial_step > 0) || !(c.min_step > 0) || !(c.quadrature_tol > 0) ||
      c.max_steps == 0) {
    throw SpecError("geodesic controls must be positive");
  }
  if (pb.velocity && pb.velocity->size() != m) throw SpecError("initial velocity has the wrong dimension");
  if (pb.target && pb.target->size() != m) throw SpecError("target point has the wrong dimension");
  if (pb.velocity.has_value() == pb.target.has_value()) {
    throw SpecError("a geodesic problem needs exactly one of an initial velocity and a target");
  }
}

std::vector<double> sample_times(double horizon, int samples) {
  std::vector<double> t(static_cast<std::size_t>(samples));
  for (int q = 0; q < samples; ++q) t[static_cast<std::size_t>(q)] = horizon * q / (samples - 1);
  t.back() = horizon;
  return t;
}

}  // namespace

Trajectory integrate_ivp(const GeodesicProblem& problem) {
  check_problem(problem);
  if (!problem.velocity) throw SpecError("integrate_ivp needs an initial velocity");
  using State = std::vector<double>;
  namespace odeint = boost::numeric::odeint;
  const std::size_t m = problem.spec.dimension();
  const ChristoffelField field(problem.spec);
  const auto rhs = [&](const State& s, State& ds, double) {
    std::copy(s.begin() + static_cast<std::ptrdiff_t>(m), s.end(), ds.begin());
    field.acceleration(std::span<const double>(s.data(), m), std::span<const double>(s.data() + m, m),
                       std::span<double>(ds.data() + m, m));
  };
  auto stepper = odeint::make_controlled(problem.controls.abs_tol, problem.controls.rel_tol,
                                         odeint::runge_kutta_dopri5<State>());
  State s(2 * m);
  std::copy(problem.start.begin(), problem.start.end(), s.begin());
  std::copy(problem.velocity->begin(), problem.velocity->end(), s.begin() + static_cast<std::ptrdiff_t>(m));

  Trajectory tr;
  tr.method = "dopri5";
  tr.times = sample_times(problem.horizon, problem.samples);
  const auto record = [&](const State& st) {
    tr.positions.emplace_back(st.begin(), st.begin() + static_cast<std::ptrdiff_t>(m));
    tr.velocities.emplace_back(st.begin() + static_cast<std::ptrdiff_t>(m), st.end());
  };
  record(s);
  double t = 0.0;
  double dt = problem.controls.initial_step;
  std::size_t attempts = 0;
  for (std::size_t q = 1; q < tr.times.size(); ++q) {
    const double target = tr.times[q];
    while (t < target) {
      const bool last = t + dt >= target;
      double step = last ? target - t : dt;
      odeint::controlled_step_result r;
      try {
        r = stepper.try_step(rhs, s, t, step);
      } catch (const std::exception& e) {
        throw NumericError("integration failed near t = " + format_double(t) + ": " + e.what());
      }
      if (++attempts > problem.controls.max_steps) {
        throw NumericError("step budget exhausted at t = " + format_double(t));
      }
      if (r == odeint::success) {
        ++tr.steps;
        if (last) t = target;  // land exactly on the sample time
        for (double v : s) {
          if (!std::isfinite(v)) throw NumericError("solution blew up near t = " + format_double(t));
        }
        if (!last || step > dt) dt = step;
      } else {
        dt = step;
        if (dt < problem.controls.min_step) {
          throw NumericError("step size collapsed to " + format_double(dt) + " at t = " + format_double(t) +
                             " (likely blow-up shortly after)");
        }
      }
    }
    record(s);
  }
  return tr;
}

// ---------------------------------------------------------------------------

bool triangular_ordering_holds(const MetricSpec& spec, std::span<const int> ordering,
                               std::span<const std::vector<double>> probes, double tolerance) {
  const int m = static_cast<int>(spec.dimension());
  if (static_cast<int>(ordering.size()) != m) throw SpecError("ordering must list every coordinate once");
  std::vector<int> pos(static_cast<std::size_t>(m), -1);
  for (int q = 0; q < m; ++q) {
    const int c = ordering[static_cast<std::size_t>(q)];
    if (c < 0 || c >= m || pos[static_cast<std::size_t>(c)] >= 0) throw SpecError("ordering must be a permutation of the chart");
    pos[static_cast<std::size_t>(c)] = q;
  }
  const auto& deps = spec.dependency_indices();
  for (const auto& pt : probes) {
    const CurvatureEngine engine(spec, pt, 2);
    const std::size_t layout_vars = deps.size();
    double scale = 1.0;
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        for (int c = 0; c < m; ++c) scale = std::max(scale, std::abs(engine.christoffel(a, b, c)));
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) {
        for (int c = 0; c < m; ++c) {
          const Jet& j = engine.christoffel_jet(a, b, c);
          const auto pc = pos[static_cast<std::size_t>(c)];
          const bool allowed = pos[static_cast<std::size_t>(a)] < pc && pos[static_cast<std::size_t>(b)] < pc;
          if (!allowed && std::abs(j.value()) > tolerance * scale) return false;
          const auto coeffs = j.coefficients();
          for (std::size_t v = 0; v < layout_vars; ++v) {
            if (pos[deps[v]] >= pc && std::abs(coeffs[1 + v]) > tolerance * scale) return false;
          }
        }
      }
    }
  }
  return true;
}

namespace {

class TriangularSolver {
 public:
  TriangularSolver(const GeodesicProblem& pb, std::span<const int> ordering, std::vector<bool> forced,
                   std::vector<std::vector<bool>> needs)
      : field_(pb.spec),
        m_(pb.spec.dimension()),
        order_(ordering.begin(), ordering.end()),
        forced_(std::move(forced)),
        needs_(std::move(needs)),
        tol_(pb.controls.quadrature_tol),
        u0_(m_),
        u1_(m_, 0.0),
        comps_(m_) {
    for (std::size_t q = 0; q < m_; ++q) u0_[q] = pb.start[static_cast<std::size_t>(order_[q])];
  }

  // Solves positions 0..m-1 in turn. For a BVP, u1 is fixed from the target.
  void solve(double horizon, const std::vector<double>* velocity, const std::vector<double>* target) {
    horizon_ = horizon;
    for (std::size_t c = 0; c < m_; ++c) {
      const auto chart = static_cast<std::size_t>(order_[c]);
      if (velocity) u1_[c] = (*velocity)[chart];
      if (forced_[c]) build(c);
      if (target) {
        const double q = (*target)[chart];
        // u(1) = u0 + u1 - (I(1) - J(1)) with the forcing integrals over [0, 1].
        double i1 = 0.0, j1 = 0.0;
        if (forced_[c]) integrals(c, 1.0, i1, j1);
        u1_[c] = q - u0_[c] + i1 - j1;
      }
    }
  }

  std::vector<double> initial_velocity() const {
    std::vector<double> v(m_);
    for (std::size_t c = 0; c < m_; ++c) v[static_cast<std::size_t>(order_[c])] = u1_[c];
    return v;
  }

  // Chart-ordered position and velocity at time t.
  void at(double t, std::vector<double>& u, std::vector<double>& v) const { state(t, nullptr, u, v); }

  std::size_t leaves() const {
    std::size_t n = 0;
    for (const auto& c : comps_) n += c.knots.size();
    return n;
  }

 private:
  struct Component {
    std::vector<double> knots;  // leaf boundaries, knots[0] = 0
    std::vector<double> I, J;   // int_0^knot phi, int_0^knot r phi
  };

  struct Pair {
    double i, j;
  };

  // Fills chart-ordered u, v from the components selected by `mask`; the rest
  // hold their initial values and zero velocity (they cannot enter the forcing).
  void state(double t, const std::vector<bool>* mask, std::vector<double>& u, std::vector<double>& v) const {
    u.assign(m_, 0.0);
    v.assign(m_, 0.0);
    for (std::size_t c = 0; c < m_; ++c) {
      const auto chart = static_cast<std::size_t>(order_[c]);
      if (mask && !(*mask)[c]) {
        u[chart] = u0_[c];
        continue;
      }
      double i = 0.0, j = 0.0;
      if (forced_[c]) integrals(c, t, i, j);
      u[chart] = u0_[c] + u1_[c] * t - (t * i - j);
      v[chart] = u1_[c] - i;
    }
  }

  double forcing(std::size_t c, double t) const {
    std::vector<double> u, v;
    state(t, &needs_[c], u, v);
    const auto gamma = field_.christoffel(u);
    const auto cc = static_cast<std::size_t>(order_[c]);
    double phi = 0.0;
    for (std::size_t a = 0; a < m_; ++a) {
      if (v[a] == 0.0) continue;
      for (std::size_t b = 0; b < m_; ++b) {
        if (v[b] == 0.0) continue;
        phi += v[a] * v[b] * gamma[(a * m_ + b) * m_ + cc];
      }
    }
    return phi;
  }

  // Adaptive Simpson on (phi, r phi) over [a, b].
  Pair simpson(std::size_t c, double a, double b, double fa, double fm, double fb, Pair whole, double tol, int depth,
               std::vector<double>* knots, std::vector<Pair>* pieces) const {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = forcing(c, lm), frm = forcing(c, rm);
    const double h = (b - a) / 12.0;
    const Pair left{h * (fa + 4 * flm + fm), h * (a * fa + 4 * lm * flm + m * fm)};
    const Pair right{h * (fm + 4 * frm + fb), h * (m * fm + 4 * rm * frm + b * fb)};
    const double ei = left.i + right.i - whole.i;
    const double ej = left.j + right.j - whole.j;
    const double scale = std::max(1.0, std::max(std::abs(a), std::abs(b)));
    if (depth > 48 || (depth >= 3 && std::abs(ei) <= 15 * tol && std::abs(ej) <= 15 * tol * scale)) {
      const Pair r{left.i + right.i + ei / 15, left.j + right.j + ej / 15};
      if (knots) {
        knots->push_back(b);
        pieces->push_back(r);
      }
      return r;
    }
    const Pair l = simpson(c, a, m, fa, flm, fm, left, tol / 2, depth + 1, knots, pieces);
    const Pair rr = simpson(c, m, b, fm, frm, fb, right, tol / 2, depth + 1, knots, pieces);
    return {l.i + rr.i, l.j + rr.j};
  }

  Pair integrate(std::size_t c, double a, double b, double tol, std::vector<double>* knots, std::vector<Pair>* pieces) const {
    if (b <= a) return {0.0, 0.0};
    const double fa = forcing(c, a), fb = forcing(c, b), fm = forcing(c, 0.5 * (a + b));
    const double h = (b - a) / 6.0;
    const double mid = 0.5 * (a + b);
    const Pair whole{h * (fa + 4 * fm + fb), h * (a * fa + 4 * mid * fm + b * fb)};
    return simpson(c, a, b, fa, fm, fb, whole, tol, 0, knots, pieces);
  }

  void build(std::size_t c) {
    Component& comp = comps_[c];
    const double end = std::max(horizon_, 1.0);
    std::vector<double> knots;
    std::vector<Pair> pieces;
    integrate(c, 0.0, end, tol_, &knots, &pieces);
    comp.knots.assign(1, 0.0);
    comp.I.assign(1, 0.0);
    comp.J.assign(1, 0.0);
    for (std::size_t q = 0; q < knots.size(); ++q) {
      comp.knots.push_back(knots[q]);
      comp.I.push_back(comp.I.back() + pieces[q].i);
      comp.J.push_back(comp.J.back() + pieces[q].j);
    }
  }

  void integrals(std::size_t c, double t, double& i, double& j) const {
    const Component& comp = comps_[c];
    auto it = std::upper_bound(comp.knots.begin(), comp.knots.end(), t);
    const std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - comp.knots.begin()) - 1));
    i = comp.I[k];
    j = comp.J[k];
    const double t0 = comp.knots[k];
    if (t > t0) {
      const Pair extra = integrate(c, t0, t, tol_ * 1e-2, nullptr, nullptr);
      i += extra.i;
      j += extra.j;
    }
  }

  ChristoffelField field_;
  std::size_t m_;
  std::vector<int> order_;
  std::vector<bool> forced_;
  std::vector<std::vector<bool>> needs_;  // needs_[c][a]: position a enters the forcing of c
  double tol_;
  double horizon_ = 1.0;
  std::vector<double> u0_;
  std::vector<double> u1_;
  std::vector<Component> comps_;
};

std::vector<std::vector<double>> probe_points(const GeodesicProblem& pb, int count, std::uint64_t seed) {
  std::vector<std::vector<double>> pts{pb.start};
  if (pb.target) pts.push_back(*pb.target);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int q = 0; q < count; ++q) {
    std::vector<double> p = pb.start;
    for (double& v : p) v += d(rng);
    try {
      pb.spec.validate_at(p);
      pts.push_back(std::move(p));
    } catch (const Error&) {
      // Random probes that leave the metric's domain of validity are skipped.
    }
  }
  return pts;
}

}  // namespace

Trajectory triangular_solve(const GeodesicProblem& problem, std::span<const int> ordering, int probe_count,
                            std::uint64_t probe_seed) {
  check_problem(problem);
  const auto probes = probe_points(problem, probe_count, probe_seed);
  if (!triangular_ordering_holds(problem.spec, ordering, probes)) {
    throw PreconditionError("coordinate ordering fails the triangularity probe");
  }
  const std::size_t m = problem.spec.dimension();
  std::vector<std::size_t> pos(m);
  for (std::size_t q = 0; q < m; ++q) pos[static_cast<std::size_t>(ordering[q])] = q;
  // A component is forced if some Gamma_{ab}^c is non-zero at a probe point; its
  // forcing needs the positions of a, b and of every coordinate Gamma^c varies with.
  std::vector<bool> forced(m, false);
  std::vector<std::vector<bool>> needs(m, std::vector<bool>(m, false));
  const auto& deps = problem.spec.dependency_indices();
  for (const auto& pt : probes) {
    const CurvatureEngine engine(problem.spec, pt, 2);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        for (std::size_t c = 0; c < m; ++c) {
          const Jet& j = engine.christoffel_jet(static_cast<int>(a), static_cast<int>(b), static_cast<int>(c));
          if (j.is_zero()) continue;
          const std::size_t pc = pos[c];
          if (j.value() != 0.0) {
            forced[pc] = true;
            needs[pc][pos[a]] = true;
            needs[pc][pos[b]] = true;
          }
          const auto coeffs = j.coefficients();
          for (std::size_t v = 0; v < deps.size(); ++v) {
            if (coeffs[1 + v] != 0.0) needs[pc][pos[deps[v]]] = true;
          }
        }
      }
    }
  }
  TriangularSolver solver(problem, ordering, std::move(forced), std::move(needs));
  const double horizon = problem.target ? 1.0 : problem.horizon;
  solver.solve(horizon, problem.velocity ? &*problem.velocity : nullptr, problem.target ? &*problem.target : nullptr);

  Trajectory tr;
  tr.method = "triangular";
  tr.times = sample_times(horizon, problem.samples);
  for (double t : tr.times) {
    std::vector<double> u, v;
    solver.at(t, u, v);
    for (double x : u) {
      if (!std::isfinite(x)) throw NumericError("quadrature produced a non-finite value at t = " + format_double(t));
    }
    tr.positions.push_back(std::move(u));
    tr.velocities.push_back(std::move(v));
  }
  tr.steps = solver.leaves();
  return tr;
}

Trajectory solve_geodesic(const GeodesicProblem& problem, std::optional<std::vector<int>> ordering) {
  if (ordering) {
    try {
      return triangular_solve(problem, *ordering);
    } catch (const PreconditionError&) {
      if (!problem.velocity) throw;
    }
  }
  return integrate_ivp(problem);
}

std::vector<double> exp_map(const MetricSpec& spec, std::span<const double> p, std::span<const double> v,
                            const GeodesicControls& controls) {
  GeodesicProblem pb{spec, std::vector<double>(p.begin(), p.end()), std::vector<double>(v.begin(), v.end()),
                     std::nullopt, 1.0, 2, controls};
  return integrate_ivp(pb).positions.back();
}

std::vector<double> log_map(const MetricSpec& spec, std::span<const double> p, std::span<const double> q,
                            std::span<const int> ordering, const GeodesicControls& controls) {
  GeodesicProblem pb{spec, std::vector<double>(p.begin(), p.end()), std::nullopt,
                     std::vector<double>(q.begin(), q.end()), 1.0, 2, controls};
  return triangular_solve(pb, ordering).velocities.front();
}

std::vector<double> energy(const MetricSpec& spec, const Trajectory& trajectory) {
  std::vector<double> out;
  out.reserve(trajectory.times.size());
  for (std::size_t q = 0; q < trajectory.times.size(); ++q) {
    const Eigen::MatrixXd g = spec.evaluate(trajectory.positions[q]);
    const auto& v = trajectory.velocities[q];
    const Eigen::Map<const Eigen::VectorXd> vv(v.data(), static_cast<Eigen::Index>(v.size()));
    out.push_back(vv.dot(g * vv));
  }
  return out;
}

void write_csv(std::ostream& out, const Trajectory& tr) {
  const std::size_t n = tr.positions.empty() ? 0 : tr.positions.front().size();
  out << 't';
  for (std::size_t q = 1; q <= n; ++q) out << ",u_" << q;
  for (std::size_t q = 1; q <= n; ++q) out << ",du_" << q;
  out << '\n';
  for (std::size_t r = 0; r < tr.times.size(); ++r) {
    out << format_double(tr.times[r]);
    for (double v : tr.positions[r]) out << ',' << format_double(v);
    for (double v : tr.velocities[r]) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace kcurv
