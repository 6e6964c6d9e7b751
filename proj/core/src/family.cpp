#include "kcurv/family.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "kcurv/error.hpp"

namespace kcurv {

namespace {

const std::vector<std::string>& profile_chart() {
  static const std::vector<std::string> chart{"y"};
  return chart;
}

double falling_factorial(int n, int r) {
  double v = 1.0;
  for (int q = 0; q < r; ++q) v *= n - q;
  return v;
}

}  // namespace

FamilyParams FamilyParams::make(int p, std::string_view f_text) {
  if (p < -1) throw SpecError("family parameter p must be at least -1, got " + std::to_string(p));
  if (p + 2 > JetLayout::kMaxVariables) throw SpecError("family parameter p is too large");
  FamilyParams params;
  params.p = p;
  params.f_text = std::string(f_text);
  params.f = parse(f_text, profile_chart());
  return params;
}

FamilyParams FamilyParams::from_json(std::string_view json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    return make(doc.at("p").get<int>(), doc.at("f").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed family parameters: ") + e.what());
  }
}

std::string FamilyParams::to_json() const {
  nlohmann::json doc;
  doc["p"] = p;
  doc["f"] = f_text;
  return doc.dump();
}

std::vector<std::string> family_coordinates(int p) {
  std::vector<std::string> c{"x", "y"};
  for (int i = 0; i <= p; ++i) c.push_back("z" + std::to_string(i));
  c.push_back("xb");
  c.push_back("yb");
  for (int i = 0; i <= p; ++i) c.push_back("zb" + std::to_string(i));
  return c;
}

Expr family_potential(const FamilyParams& params) {
  const auto chart = family_coordinates(params.p);
  std::vector<Expr> terms{parse(params.f_text, chart)};
  const Expr y = Expr::variable("y", 1);
  for (int i = 0; i <= params.p; ++i) {
    const Expr z = Expr::variable(chart[static_cast<std::size_t>(2 + i)], static_cast<std::size_t>(2 + i));
    terms.push_back(Expr::product({i == 0 ? y : Expr::power(y, static_cast<unsigned>(i + 1)), z}));
  }
  return Expr::sum(std::move(terms));
}

MetricSpec build_metric(const FamilyParams& params) {
  const int p = params.p;
  const FamilyIndex ix{p};
  MetricSpec spec(family_coordinates(p), Signature{p + 3, p + 3});
  const auto u = [](int i) { return static_cast<std::size_t>(i); };
  spec.set_component(u(ix.x()), u(ix.x()), Expr::negate(Expr::product({Expr::constant(2.0), family_potential(params)})));
  spec.set_component(u(ix.x()), u(ix.xb()), Expr::constant(1.0));
  spec.set_component(u(ix.y()), u(ix.yb()), Expr::constant(1.0));
  for (int i = 0; i <= p; ++i) spec.set_component(u(ix.z(i)), u(ix.zb(i)), Expr::constant(1.0));
  return spec;
}

std::vector<double> profile_derivatives(const FamilyParams& params, double y, int n) {
  if (n < 0) throw SpecError("derivative count must be non-negative");
  const double base[1] = {y};
  const std::size_t active[1] = {0};
  const auto chart = make_jet_chart(profile_chart(), std::span<const std::size_t>(active));
  const Jet j = eval_jet(params.f, base, chart, n);
  std::vector<double> out(static_cast<std::size_t>(n) + 1);
  for (int d = 0; d <= n; ++d) {
    const int m[1] = {d};
    out[static_cast<std::size_t>(d)] = j.partial(m);
  }
  return out;
}

double potential_mixed_derivative(const FamilyParams& params, std::span<const double> point, int i, int n) {
  if (i < 0 || i > params.p || n < 0) return 0.0;
  if (n > i + 1) return 0.0;
  return falling_factorial(i + 1, n) * std::pow(point[1], i + 1 - n);
}

double potential_y_derivative(const FamilyParams& params, std::span<const double> point, int n) {
  if (point.size() != static_cast<std::size_t>(params.dimension())) throw SpecError("point has the wrong dimension");
  double v = profile_derivatives(params, point[1], n)[static_cast<std::size_t>(n)];
  const FamilyIndex ix{params.p};
  for (int i = 0; i <= params.p; ++i) {
    v += potential_mixed_derivative(params, point, i, n) * point[static_cast<std::size_t>(ix.z(i))];
  }
  return v;
}

SparseTensor oracle_nabla_k_R(const FamilyParams& params, std::span<const double> point, int k) {
  if (k < 0) throw SpecError("derivative order must be non-negative");
  const FamilyIndex ix{params.p};
  SparseTensor t;
  t.valence = static_cast<std::size_t>(k) + 4;
  IndexTuple base{ix.x(), ix.y(), ix.y(), ix.x()};
  base.resize(t.valence, ix.y());
  const double yy = potential_y_derivative(params, point, k + 2);
  if (yy != 0.0) insert_with_curvature_symmetries(t, base, yy);
  for (int i = 0; i <= params.p; ++i) {
    const double v = potential_mixed_derivative(params, point, i, k + 1);
    if (v == 0.0) continue;
    IndexTuple s = base;
    s[2] = ix.z(i);
    insert_with_curvature_symmetries(t, s, v);
    for (std::size_t d = 4; d < t.valence; ++d) {
      IndexTuple r = base;
      r[d] = ix.z(i);
      insert_with_curvature_symmetries(t, r, v);
    }
  }
  return t;
}

void require_positivity(const FamilyParams& params, double y) {
  const auto d = profile_derivatives(params, y, params.p + 4);
  const double f3 = d[static_cast<std::size_t>(params.p + 3)];
  const double f4 = d[static_cast<std::size_t>(params.p + 4)];
  if (!(f3 > 0.0) || !(f4 > 0.0)) {
    throw PreconditionError("positivity fails at y = " + std::to_string(y) + ": f^(" + std::to_string(params.p + 3) +
                            ") = " + std::to_string(f3) + ", f^(" + std::to_string(params.p + 4) +
                            ") = " + std::to_string(f4));
  }
}

double alpha_closed_form(const FamilyParams& params, double y) {
  const auto d = profile_derivatives(params, y, params.p + 5);
  const auto at = [&](int n) { return d[static_cast<std::size_t>(params.p + n)]; };
  if (!(at(4) > 0.0)) {
    throw PreconditionError("alpha needs f^(" + std::to_string(params.p + 4) + ") > 0, got " + std::to_string(at(4)) +
                            " at y = " + std::to_string(y));
  }
  return at(3) * at(5) / (at(4) * at(4));
}

double alpha_prime(const FamilyParams& params, double y) {
  const auto d = profile_derivatives(params, y, params.p + 6);
  const auto at = [&](int n) { return d[static_cast<std::size_t>(params.p + n)]; };
  const double f3 = at(3), f4 = at(4), f5 = at(5), f6 = at(6);
  if (!(f4 > 0.0)) {
    throw PreconditionError("alpha needs f^(" + std::to_string(params.p + 4) + ") > 0, got " + std::to_string(f4) +
                            " at y = " + std::to_string(y));
  }
  return (f4 * f5 + f3 * f6) / (f4 * f4) - 2.0 * f3 * f5 * f5 / (f4 * f4 * f4);
}

Eigen::VectorXd generalized_jacobi(CurvatureEngine& engine, int k, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  std::vector<Eigen::VectorXd> args(static_cast<std::size_t>(k) + 4, y);
  args[0] = x;
  args[3] = Eigen::VectorXd::Zero(y.size());
  const Eigen::VectorXd w = engine.evaluate_open(k, args, 3);
  return engine.inverse_metric() * w;
}

AlphaSample alpha_via_jacobi(CurvatureEngine& engine, int p, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& h) {
  const auto m = static_cast<Eigen::Index>(engine.dimension());
  if (h.rows() != m || h.cols() != m) throw SpecError("auxiliary inner product has the wrong size");
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success || (h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * h.cwiseAbs().maxCoeff()) {
    throw SpecError("auxiliary inner product must be symmetric positive definite");
  }
  AlphaSample s;
  s.j1 = generalized_jacobi(engine, p + 1, x, y);
  s.j2 = generalized_jacobi(engine, p + 2, x, y);
  s.j3 = generalized_jacobi(engine, p + 3, x, y);
  if (s.j1.cwiseAbs().maxCoeff() == 0.0) {
    throw NumericError("ill-posed sample: J_" + std::to_string(p + 1) + "(Y)X vanishes");
  }
  const double den = s.j2.dot(h * s.j2);
  if (!(den > 0.0)) throw NumericError("ill-posed sample: J_" + std::to_string(p + 2) + "(Y)X vanishes");
  s.alpha = s.j1.dot(h * s.j3) / den;
  return s;
}

AlphaSample alpha_via_jacobi(const FamilyParams& params, std::span<const double> point, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y, const Eigen::MatrixXd& h) {
  CurvatureEngine engine(build_metric(params), std::vector<double>(point.begin(), point.end()), params.p + 5);
  return alpha_via_jacobi(engine, params.p, x, y, h);
}

ConstancyReport alpha_constancy(const FamilyParams& params, double lo, double hi, int n, bool with_jacobi,
                                double variance_threshold) {
  if (n < 1) throw SpecError("grid needs at least one point");
  if (!(lo <= hi)) throw SpecError("grid bounds must satisfy lo <= hi");
  ConstancyReport rep;
  const int m = params.dimension();
  const MetricSpec spec = build_metric(params);
  Eigen::VectorXd xv = Eigen::VectorXd::Zero(m), yv = Eigen::VectorXd::Zero(m);
  xv(0) = 1.0;
  yv(0) = 0.25;
  yv(1) = 1.0;
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m);
  for (int q = 0; q < n; ++q) {
    AlphaRow row;
    row.y = n == 1 ? lo : lo + (hi - lo) * q / (n - 1);
    require_positivity(params, row.y);
    row.alpha = alpha_closed_form(params, row.y);
    row.alpha_prime = alpha_prime(params, row.y);
    if (with_jacobi) {
      std::vector<double> pt(static_cast<std::size_t>(m), 0.0);
      pt[1] = row.y;
      CurvatureEngine engine(spec, std::move(pt), params.p + 5);
      row.alpha_jacobi = alpha_via_jacobi(engine, params.p, xv, yv, h).alpha;
    } else {
      row.alpha_jacobi = std::nan("");
    }
    rep.rows.push_back(row);
  }
  double mean = 0.0, mn = rep.rows.front().alpha, mx = mn;
  for (const auto& r : rep.rows) {
    mean += r.alpha;
    mn = std::min(mn, r.alpha);
    mx = std::max(mx, r.alpha);
  }
  mean /= n;
  double var = 0.0;
  for (const auto& r : rep.rows) var += (r.alpha - mean) * (r.alpha - mean);
  rep.variance = n > 1 ? var / (n - 1) : 0.0;
  rep.spread = mx - mn;
  rep.constant = rep.variance <= variance_threshold;
  for (std::size_t q = 1; q < rep.rows.size(); ++q) {
    const double a = rep.rows[q - 1].alpha_prime, b = rep.rows[q].alpha_prime;
    if ((a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)) ++rep.alpha_prime_sign_changes;
  }
  return rep;
}

}  // namespace kcurv
