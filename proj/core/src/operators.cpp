#include <algorithm>
#include <cmath>

#include "kcurv/curvature.hpp"
#include "kcurv/error.hpp"

namespace kcurv {

Eigen::MatrixXd ricci(CurvatureEngine& engine) {
  const auto m = static_cast<Eigen::Index>(engine.dimension());
  const auto& gi = engine.inverse_metric();
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(m, m);
  for (const auto& s : engine.support(0)) {
    const double hil = gi(s[0], s[3]);
    if (hil != 0.0) rho(s[1], s[2]) += hil * engine.curvature(s);
  }
  return rho;
}

double scalar_curvature(CurvatureEngine& engine) {
  const auto& gi = engine.inverse_metric();
  double tau = 0.0;
  for (const auto& s : engine.support(0)) {
    const double w = gi(s[0], s[3]) * gi(s[1], s[2]);
    if (w != 0.0) tau += w * engine.curvature(s);
  }
  return tau;
}

namespace {

void require_vector(const CurvatureEngine& engine, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != engine.dimension()) {
    throw SpecError("vector has " + std::to_string(v.size()) + " components, manifold has dimension " +
                    std::to_string(engine.dimension()));
  }
}

}  // namespace

Operator jacobi_operator(CurvatureEngine& engine, const Eigen::VectorXd& x) {
  require_vector(engine, x);
  const auto m = static_cast<Eigen::Index>(engine.dimension());
  Eigen::MatrixXd lowered = Eigen::MatrixXd::Zero(m, m);
  for (const auto& s : engine.support(0)) {
    const double w = x(s[1]) * x(s[2]);
    if (w != 0.0) lowered(s[3], s[0]) += w * engine.curvature(s);
  }
  Operator op;
  op.matrix = engine.inverse_metric() * lowered;
  op.point.assign(engine.point().begin(), engine.point().end());
  op.defining_vectors = {x};
  return op;
}

Operator skew_curvature_operator(CurvatureEngine& engine, const Eigen::VectorXd& e1, const Eigen::VectorXd& e2) {
  require_vector(engine, e1);
  require_vector(engine, e2);
  const auto& g = engine.metric();
  const double g11 = e1.dot(g * e1);
  const double g12 = e1.dot(g * e2);
  const double g22 = e2.dot(g * e2);
  const double det = g11 * g22 - g12 * g12;
  if (std::abs(det) <= 1e-12) throw NumericError("plane is degenerate: Gram determinant is " + std::to_string(det));
  // R is antisymmetric in its first pair, so R(e1', e2') = R(e1, e2) / sqrt|det Gram|
  // for any orthonormal basis (e1', e2') with the orientation of (e1, e2).
  const auto m = static_cast<Eigen::Index>(engine.dimension());
  Eigen::MatrixXd lowered = Eigen::MatrixXd::Zero(m, m);
  for (const auto& s : engine.support(0)) {
    const double w = e1(s[0]) * e2(s[1]);
    if (w != 0.0) lowered(s[3], s[2]) += w * engine.curvature(s);
  }
  Operator op;
  op.matrix = engine.inverse_metric() * lowered / std::sqrt(std::abs(det));
  op.point.assign(engine.point().begin(), engine.point().end());

  Eigen::VectorXd u1 = e1, u2 = e2;
  if (std::abs(g11) > 1e-12) {
    u1 = e1 / std::sqrt(std::abs(g11));
    u2 = e2 - (g12 / g11) * e1;
    u2 /= std::sqrt(std::abs(u2.dot(g * u2)));
  }
  op.defining_vectors = {u1, u2};
  return op;
}

bool triangularity_probe(const CurvatureEngine& engine, std::span<const int> v, std::span<const int> v_bar,
                         double tolerance) {
  const int m = static_cast<int>(engine.dimension());
  auto in_bar = [&](int c) { return std::find(v_bar.begin(), v_bar.end(), c) != v_bar.end(); };
  for (int b : v) {
    for (int a = 0; a < m; ++a) {
      for (int c = 0; c < m; ++c) {
        if (!in_bar(c) && std::abs(engine.christoffel(a, b, c)) > tolerance) return false;
      }
    }
  }
  for (int b : v_bar) {
    for (int a = 0; a < m; ++a) {
      for (int c = 0; c < m; ++c) {
        if (std::abs(engine.christoffel(a, b, c)) > tolerance) return false;
      }
    }
  }
  return true;
}

}  // namespace kcurv
