#include "cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kcurv/curvature.hpp"
#include "kcurv/error.hpp"
#include "kcurv/family.hpp"
#include "kcurv/geodesic.hpp"
#include "kcurv/invariants.hpp"

namespace kcurv::cli {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v == 0.0 ? 0.0 : v);
  return buf;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SpecError("cannot read '" + s + "' as a number in " + what);
  }
}

FamilyParams parse_family(const std::string& text) {
  std::optional<int> p;
  std::optional<std::string> f;
  for (const auto& part : split(text, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw SpecError("--family expects p=<int>,f=<expr>, got '" + text + "'");
    const auto key = part.substr(0, eq);
    const auto val = part.substr(eq + 1);
    if (key == "p") {
      const double v = parse_number(val, "--family");
      if (v != std::floor(v)) throw SpecError("--family p must be an integer");
      p = static_cast<int>(v);
    } else if (key == "f") {
      f = val;
    } else {
      throw SpecError("unknown --family key '" + key + "'");
    }
  }
  if (!p || !f) throw SpecError("--family needs both p and f");
  return FamilyParams::make(*p, *f);
}

struct Source {
  MetricSpec spec;
  std::optional<FamilyParams> family;
  nlohmann::json expect;
  std::optional<std::vector<double>> point;
  double spread = 1.0;  // half-width of the random sampling box around the base point
};

Source load_source(const RunConfig& cfg) {
  if (cfg.family.has_value() == cfg.spec_path.has_value()) {
    throw SpecError("give exactly one of --family and --spec");
  }
  if (cfg.family) {
    auto params = parse_family(*cfg.family);
    Source s{build_metric(params), params, nlohmann::json::object(), std::nullopt, 1.0};
    return s;
  }
  std::ifstream in(*cfg.spec_path);
  if (!in) throw SpecError("cannot open metric spec '" + *cfg.spec_path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Source s{MetricSpec::from_json(text), std::nullopt, nlohmann::json::object(), std::nullopt, 0.5};
  const auto doc = nlohmann::json::parse(text);
  try {
    if (doc.contains("expect")) s.expect = doc.at("expect");
    if (doc.contains("point")) s.point = doc.at("point").get<std::vector<double>>();
    if (doc.contains("spread")) s.spread = doc.at("spread").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed metric spec: ") + e.what());
  }
  return s;
}

std::vector<double> base_point(const RunConfig& cfg, const Source& src) {
  const auto m = src.spec.dimension();
  std::vector<double> p = cfg.point ? *cfg.point : src.point ? *src.point : std::vector<double>(m, 0.0);
  if (p.size() != m) {
    throw SpecError("--point has " + std::to_string(p.size()) + " coordinates, the metric has " + std::to_string(m));
  }
  return p;
}

/// The base point followed by seeded random points around it where the metric is valid.
std::vector<std::vector<double>> sample_points(const Source& src, const std::vector<double>& base, int n,
                                               std::mt19937_64& rng) {
  std::vector<std::vector<double>> pts;
  std::uniform_real_distribution<double> d(-src.spread, src.spread);
  try {
    src.spec.validate_at(base);
    pts.push_back(base);
  } catch (const Error&) {
  }
  for (int attempt = 0; static_cast<int>(pts.size()) < n && attempt < 100 * n; ++attempt) {
    auto p = base;
    for (double& v : p) v += d(rng);
    try {
      src.spec.validate_at(p);
      pts.push_back(std::move(p));
    } catch (const Error&) {
    }
  }
  if (pts.empty()) throw NumericError("no valid sample point near the base point");
  return pts;
}

std::string slot_label(const std::vector<std::string>& names, const IndexTuple& slots) {
  std::string s = "(";
  for (std::size_t q = 0; q < slots.size(); ++q) {
    if (q > 0) s += q == 4 ? ";" : ",";
    s += names[static_cast<std::size_t>(slots[q])];
  }
  return s + ")";
}

// One entry per orbit of the curvature symmetries: i < j, k > l, (i, j) <= (l, k).
bool representative(const IndexTuple& s) {
  return s[0] < s[1] && s[2] > s[3] && std::pair(s[0], s[1]) <= std::pair(s[3], s[2]);
}

class Output {
 public:
  Output(const RunConfig& cfg, std::ostream& fallback) : stream_(&fallback) {
    if (cfg.out) {
      file_.open(*cfg.out, std::ios::binary);
      if (!file_) throw SpecError("cannot write '" + *cfg.out + "'");
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

// ---------------------------------------------------------------------------

int cmd_curvature(const RunConfig& cfg, std::ostream& out) {
  const Source src = load_source(cfg);
  if (cfg.k < 0 || cfg.k > 8) throw SpecError("--k must be between 0 and 8");
  const auto P = base_point(cfg, src);
  src.spec.validate_at(P);
  const double tol = cfg.tol.value_or(1e-12);
  auto engine = CurvatureEngine::for_derivative_order(src.spec, P, cfg.k);
  const auto entries = engine.nonzero_components(cfg.k, tol);
  Output o(cfg, out);
  const auto& names = src.spec.coordinates();
  std::vector<const TensorEntry*> listed;
  for (const auto& e : entries) {
    if (representative(e.slots)) listed.push_back(&e);
  }
  std::sort(listed.begin(), listed.end(), [](auto* a, auto* b) { return a->slots < b->slots; });
  if (listed.empty()) {
    *o << "no non-zero components\n";
  } else {
    *o << "# nabla^" << cfg.k << " R: " << listed.size() << " independent non-zero components ("
       << entries.size() << " with symmetric images)\n";
    for (const auto* e : listed) *o << slot_label(names, e->slots) << " = " << num(e->value) << '\n';
  }
  if (src.family) {
    const auto oracle = oracle_nabla_k_R(*src.family, P, cfg.k);
    const auto mine = engine.sparse_tensor(cfg.k, tol);
    const double delta = max_difference(mine, oracle) / std::max(1.0, oracle.max_abs());
    *o << "max oracle delta: " << sci(delta) << '\n';
  }
  return kOk;
}

int cmd_alpha(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.family) throw SpecError("alpha needs --family");
  if (!cfg.grid) throw SpecError("alpha needs --grid y=lo:hi:n");
  if (cfg.grid->var != "y") throw SpecError("alpha sweeps y; got grid variable '" + cfg.grid->var + "'");
  const auto params = parse_family(*cfg.family);
  const auto rep = alpha_constancy(params, cfg.grid->lo, cfg.grid->hi, cfg.grid->n, true, cfg.tol.value_or(1e-20));
  Output o(cfg, out);
  *o << "# schema: y,alpha,alpha_jacobi,alpha_prime\n";
  *o << "y,alpha,alpha_jacobi,alpha_prime\n";
  for (const auto& r : rep.rows) {
    *o << format_double(r.y) << ',' << format_double(r.alpha) << ',' << format_double(r.alpha_jacobi) << ','
       << format_double(r.alpha_prime) << '\n';
  }
  *o << "# verdict: " << (rep.constant ? "CONSTANT" : "NON-CONSTANT") << " variance=" << sci(rep.variance)
     << " spread=" << sci(rep.spread) << " alpha_prime_sign_changes=" << rep.alpha_prime_sign_changes << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// check

struct CheckLine {
  std::string status;
  std::string name;
  std::string detail;
};

struct CheckContext {
  const RunConfig& cfg;
  const Source& src;
  std::vector<std::vector<double>> points;
  std::uint64_t seed;

  double tol(double fallback) const { return cfg.tol.value_or(fallback); }
};

CheckLine verdict(const std::string& name, double observed, double tol, const std::string& what) {
  return {observed <= tol ? "PASS" : "FAIL", name, what + "=" + sci(observed) + " (tol " + sci(tol) + ")"};
}

template <std::size_t N>
void for_index_tuples(int m, std::mt19937_64& rng, const std::function<void(const std::array<int, N>&)>& fn) {
  double total = 1.0;
  for (std::size_t q = 0; q < N; ++q) total *= m;
  std::array<int, N> idx{};
  if (total <= 20000) {
    for (long c = 0; c < static_cast<long>(total); ++c) {
      long r = c;
      for (std::size_t q = 0; q < N; ++q) {
        idx[q] = static_cast<int>(r % m);
        r /= m;
      }
      fn(idx);
    }
    return;
  }
  std::uniform_int_distribution<int> d(0, m - 1);
  for (int c = 0; c < 20000; ++c) {
    for (auto& v : idx) v = d(rng);
    fn(idx);
  }
}

CheckLine check_symmetries(CheckContext& ctx) {
  std::mt19937_64 rng(ctx.seed + 1);
  double worst = 0.0;
  const int m = static_cast<int>(ctx.src.spec.dimension());
  for (const auto& P : ctx.points) {
    CurvatureEngine e(ctx.src.spec, P, 2);
    const double scale = std::max(1.0, e.max_abs_component(0));
    for_index_tuples<4>(m, rng, [&](const std::array<int, 4>& s) {
      const auto [i, j, k, l] = s;
      const double r = e.riemann(i, j, k, l);
      const double res = std::max({std::abs(r + e.riemann(j, i, k, l)), std::abs(r + e.riemann(i, j, l, k)),
                                   std::abs(r - e.riemann(k, l, i, j)),
                                   std::abs(r + e.riemann(j, k, i, l) + e.riemann(k, i, j, l))});
      worst = std::max(worst, res / scale);
    });
  }
  return verdict("symmetries", worst, ctx.tol(1e-12), "max_rel_residual");
}

CheckLine check_bianchi(CheckContext& ctx) {
  std::mt19937_64 rng(ctx.seed + 2);
  double worst = 0.0;
  const int m = static_cast<int>(ctx.src.spec.dimension());
  for (const auto& P : ctx.points) {
    CurvatureEngine e(ctx.src.spec, P, 3);
    const double scale = std::max(1.0, e.max_abs_component(1));
    for_index_tuples<5>(m, rng, [&](const std::array<int, 5>& s) {
      const auto [a, b, c, d, x] = s;
      const std::array<int, 5> t1{a, b, c, d, x}, t2{b, x, c, d, a}, t3{x, a, c, d, b};
      const double res = e.curvature(t1) + e.curvature(t2) + e.curvature(t3);
      worst = std::max(worst, std::abs(res) / scale);
    });
  }
  return verdict("bianchi", worst, ctx.tol(1e-10), "max_rel_residual");
}

const std::map<std::string, ContractionSchema (*)()>& named_schemas() {
  static const std::map<std::string, ContractionSchema (*)()> table{
      {"scalar_curvature", schemas::scalar_curvature}, {"ricci_norm", schemas::ricci_norm},
      {"riemann_norm", schemas::riemann_norm},         {"nabla_riemann_norm", schemas::nabla_riemann_norm},
      {"cubic_a", schemas::cubic_a},                   {"cubic_b", schemas::cubic_b},
      {"laplacian_scalar", schemas::laplacian_scalar}};
  return table;
}

CheckLine check_weyl(CheckContext& ctx) {
  if (!ctx.src.expect.empty()) {
    // Control metric: named invariants must take their expected values at every point.
    double worst = 0.0;
    std::string seen;
    for (const auto& P : ctx.points) {
      CurvatureEngine e(ctx.src.spec, P, 5);
      for (const auto& [key, val] : ctx.src.expect.items()) {
        const auto it = named_schemas().find(key);
        if (it == named_schemas().end()) throw SpecError("unknown invariant '" + key + "' in expect");
        const double v = evaluate(it->second(), e);
        worst = std::max(worst, std::abs(v - val.get<double>()));
        if (&P == &ctx.points.front()) seen += " " + key + "=" + num(v);
      }
    }
    auto line = verdict("weyl", worst, ctx.tol(1e-9), "expected-nonzero control, max_abs_error");
    line.detail += ";" + seen;
    return line;
  }
  auto list = catalog(3, 2);
  const auto extra = random_schemas(200, ctx.seed);
  list.insert(list.end(), extra.begin(), extra.end());
  double worst = 0.0;
  for (const auto& P : ctx.points) {
    CurvatureEngine e(ctx.src.spec, P, 5);
    for (const auto& s : list) worst = std::max(worst, std::abs(evaluate(s, e)) / contraction_scale(s, e));
  }
  auto line = verdict("weyl", worst, ctx.tol(1e-10), "max |value|/scale");
  line.detail += " over " + std::to_string(list.size()) + " schemas";
  return line;
}

CheckLine check_nilpotency(CheckContext& ctx) {
  if (!ctx.src.family) return {"SKIP", "nilpotency", "only defined for family metrics"};
  std::mt19937_64 rng(ctx.seed + 3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const auto m = static_cast<Eigen::Index>(ctx.src.spec.dimension());
  const auto rnd = [&] {
    Eigen::VectorXd v(m);
    for (Eigen::Index q = 0; q < m; ++q) v(q) = d(rng);
    return v;
  };
  const int per_point = (200 + static_cast<int>(ctx.points.size()) - 1) / static_cast<int>(ctx.points.size());
  double ric = 0.0, jac = 0.0, skew = 0.0;
  for (const auto& P : ctx.points) {
    CurvatureEngine e(ctx.src.spec, P, 2);
    ric = std::max(ric, ricci(e).cwiseAbs().maxCoeff());
    for (int s = 0; s < per_point; ++s) {
      const auto J = jacobi_operator(e, rnd()).matrix;
      jac = std::max(jac, (J * J).cwiseAbs().maxCoeff());
      for (int attempt = 0; attempt < 10; ++attempt) {
        try {
          const auto R = skew_curvature_operator(e, rnd(), rnd()).matrix;
          skew = std::max(skew, (R * R).cwiseAbs().maxCoeff());
          break;
        } catch (const NumericError&) {
        }
      }
    }
  }
  const bool ok = ric <= ctx.tol(1e-12) && jac <= ctx.tol(1e-10) && skew <= ctx.tol(1e-10);
  return {ok ? "PASS" : "FAIL", "nilpotency",
          "ricci=" + sci(ric) + " jacobi^2=" + sci(jac) + " skew^2=" + sci(skew)};
}

CheckLine check_oracle(CheckContext& ctx) {
  if (!ctx.src.family) return {"SKIP", "oracle", "closed forms exist only for family metrics"};
  const auto& params = *ctx.src.family;
  const int top = params.p + 2;
  double worst = 0.0;
  for (const auto& P : ctx.points) {
    CurvatureEngine e = CurvatureEngine::for_derivative_order(ctx.src.spec, P, top);
    for (int k = 0; k <= top; ++k) {
      const auto oracle = oracle_nabla_k_R(params, P, k);
      worst = std::max(worst, max_difference(e.sparse_tensor(k), oracle) / std::max(1.0, oracle.max_abs()));
    }
  }
  auto line = verdict("oracle", worst, ctx.tol(1e-9), "max_rel_delta");
  line.detail += " for k<=" + std::to_string(top);
  return line;
}

CheckLine check_frame(CheckContext& ctx) {
  if (!ctx.src.family) return {"SKIP", "frame", "only defined for family metrics"};
  const auto& params = *ctx.src.family;
  double worst = 0.0;
  for (const auto& P : ctx.points) {
    try {
      const auto frame = normalize_frame(params, P);
      const auto agree = compare_with_model(params, P, frame, params.p + 2);
      worst = std::max(worst, agree.gram_deviation);
      for (double d : agree.max_deviation) worst = std::max(worst, d);
    } catch (const PreconditionError& e) {
      return {"FAIL-PRECONDITION", "frame", e.what()};
    }
  }
  auto line = verdict("frame", worst, ctx.tol(1e-9), "max_model_deviation");
  line.detail += " for k<=" + std::to_string(params.p + 2);
  return line;
}

double energy_drift(const MetricSpec& spec, const Trajectory& tr) {
  const auto e = energy(spec, tr);
  double d = 0.0;
  for (double v : e) d = std::max(d, std::abs(v - e.front()));
  return d;
}

CheckLine check_geodesics(CheckContext& ctx) {
  std::mt19937_64 rng(ctx.seed + 4);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  const auto& spec = ctx.src.spec;
  const std::size_t m = spec.dimension();
  const auto rnd = [&] {
    std::vector<double> v(m);
    for (double& x : v) x = d(rng);
    return v;
  };
  const auto& P0 = ctx.points.front();
  if (!ctx.src.family) {
    auto v = rnd();
    for (double& x : v) x *= 0.5;
    const auto tr = integrate_ivp({spec, P0, v, std::nullopt, 1.0, 21, {}});
    return verdict("geodesics", energy_drift(spec, tr), ctx.tol(1e-8), "energy_drift");
  }
  std::vector<int> ordering(m);
  for (std::size_t q = 0; q < m; ++q) ordering[q] = static_cast<int>(q);
  const GeodesicProblem ivp{spec, P0, rnd(), std::nullopt, 10.0, 101, {}};
  const auto a = integrate_ivp(ivp);
  const auto b = triangular_solve(ivp, ordering);
  double agree = 0.0;
  for (std::size_t r = 0; r < a.times.size(); ++r) {
    for (std::size_t c = 0; c < m; ++c) agree = std::max(agree, std::abs(a.positions[r][c] - b.positions[r][c]));
  }
  const double drift = energy_drift(spec, a);
  double roundtrip = 0.0;
  for (int pair = 0; pair < 10; ++pair) {
    const auto P = ctx.points[static_cast<std::size_t>(pair) % ctx.points.size()];
    const auto Q = rnd();
    const auto v = log_map(spec, P, Q, ordering);
    const auto R = exp_map(spec, P, v);
    for (std::size_t c = 0; c < m; ++c) roundtrip = std::max(roundtrip, std::abs(R[c] - Q[c]));
  }
  const bool ok = agree <= ctx.tol(1e-6) && drift <= ctx.tol(1e-8) && roundtrip <= ctx.tol(1e-8);
  return {ok ? "PASS" : "FAIL", "geodesics",
          "solver_agreement=" + sci(agree) + " energy_drift=" + sci(drift) + " exp_log_roundtrip=" + sci(roundtrip)};
}

using CheckFn = CheckLine (*)(CheckContext&);

const std::vector<std::pair<std::string, CheckFn>>& all_checks() {
  static const std::vector<std::pair<std::string, CheckFn>> table{
      {"symmetries", check_symmetries}, {"bianchi", check_bianchi},     {"oracle", check_oracle},
      {"weyl", check_weyl},             {"nilpotency", check_nilpotency}, {"frame", check_frame},
      {"geodesics", check_geodesics}};
  return table;
}

int cmd_check(const RunConfig& cfg, std::ostream& out) {
  const Source src = load_source(cfg);
  for (const auto& name : cfg.only) {
    const auto& t = all_checks();
    if (std::none_of(t.begin(), t.end(), [&](const auto& c) { return c.first == name; })) {
      throw SpecError("unknown check '" + name + "'");
    }
  }
  if (cfg.points < 1) throw SpecError("--points must be positive");
  std::mt19937_64 rng(cfg.seed);
  CheckContext ctx{cfg, src, sample_points(src, base_point(cfg, src), cfg.points, rng), cfg.seed};
  Output o(cfg, out);
  bool ok = true;
  for (const auto& [name, fn] : all_checks()) {
    if (!cfg.only.empty() && std::find(cfg.only.begin(), cfg.only.end(), name) == cfg.only.end()) continue;
    CheckLine line;
    try {
      line = fn(ctx);
    } catch (const PreconditionError& e) {
      line = {"FAIL-PRECONDITION", name, e.what()};
    } catch (const NumericError& e) {
      line = {"FAIL-NUMERIC", name, e.what()};
    }
    if (line.status != "PASS" && line.status != "SKIP") ok = false;
    char head[48];
    std::snprintf(head, sizeof head, "%-17s %-11s ", line.status.c_str(), line.name.c_str());
    *o << head << line.detail << '\n';
  }
  *o << "# " << ctx.points.size() << " sample points, seed " << cfg.seed << '\n';
  return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------

int cmd_geodesic(const RunConfig& cfg, std::ostream& out) {
  const Source src = load_source(cfg);
  const auto P = base_point(cfg, src);
  src.spec.validate_at(P);
  if (cfg.method != "auto" && cfg.method != "rk" && cfg.method != "triangular") {
    throw SpecError("--method must be auto, rk or triangular");
  }
  GeodesicProblem pb{src.spec, P, cfg.velocity, cfg.target, cfg.horizon, cfg.samples, {}};
  if (cfg.tol) pb.controls.abs_tol = pb.controls.rel_tol = pb.controls.quadrature_tol = *cfg.tol;

  std::optional<std::vector<int>> ordering;
  const std::size_t m = src.spec.dimension();
  if (cfg.ordering) {
    ordering.emplace();
    for (const auto& name : *cfg.ordering) {
      const auto idx = src.spec.coordinate_index(name);
      if (!idx) throw SpecError("unknown coordinate '" + name + "' in --order");
      ordering->push_back(static_cast<int>(*idx));
    }
  } else if (src.family) {
    ordering.emplace(m);
    for (std::size_t q = 0; q < m; ++q) (*ordering)[q] = static_cast<int>(q);
  }

  Trajectory tr;
  if (cfg.method == "rk") {
    tr = integrate_ivp(pb);
  } else if (cfg.method == "triangular") {
    if (!ordering) throw SpecError("--method triangular needs --order");
    tr = triangular_solve(pb, *ordering);
  } else {
    if (pb.target && !ordering) throw SpecError("boundary value problems need a triangular --order");
    tr = solve_geodesic(pb, ordering);
  }
  Output o(cfg, out);
  *o << "# schema: t";
  for (std::size_t q = 1; q <= m; ++q) *o << ",u_" << q;
  for (std::size_t q = 1; q <= m; ++q) *o << ",du_" << q;
  *o << "\n# method: " << tr.method << " steps=" << tr.steps << " horizon=" << format_double(tr.times.back())
     << " energy_drift=" << sci(energy_drift(src.spec, tr)) << '\n';
  write_csv(*o, tr);
  return kOk;
}

int cmd_invariants(const RunConfig& cfg, std::ostream& out) {
  const Source src = load_source(cfg);
  const auto P = base_point(cfg, src);
  src.spec.validate_at(P);
  if (cfg.max_factors < 1 || cfg.max_factors > kMaxCatalogFactors || cfg.max_deriv < 0 ||
      cfg.max_deriv > kMaxCatalogDerivative) {
    throw SpecError("catalog limits are 1..4 factors and derivative order 0..4");
  }
  if (cfg.random < 0) throw SpecError("--random must be non-negative");
  auto list = catalog(cfg.max_factors, cfg.max_deriv);
  const auto extra = random_schemas(cfg.random, cfg.seed);
  list.insert(list.end(), extra.begin(), extra.end());
  int top = 0;
  for (const auto& s : list) top = std::max(top, s.max_derivative());
  CurvatureEngine e = CurvatureEngine::for_derivative_order(src.spec, P, top);
  Output o(cfg, out);
  *o << "# schema: schema,value,scale,ratio\n";
  *o << "schema,value,scale,ratio\n";
  for (const auto& s : list) {
    const double v = evaluate(s, e);
    const double scale = contraction_scale(s, e);
    *o << '"' << s.to_string() << "\"," << format_double(v) << ',' << format_double(scale) << ','
       << format_double(std::abs(v) / scale) << '\n';
  }
  return kOk;
}

}  // namespace

Grid parse_grid(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw SpecError("--grid expects var=lo:hi:n, got '" + text + "'");
  const auto parts = split(text.substr(eq + 1), ':');
  if (parts.size() != 3) throw SpecError("--grid expects var=lo:hi:n, got '" + text + "'");
  Grid g{text.substr(0, eq), parse_number(parts[0], "--grid"), parse_number(parts[1], "--grid"), 0};
  const double n = parse_number(parts[2], "--grid");
  if (n != std::floor(n) || n < 1) throw SpecError("--grid needs a positive integer point count");
  g.n = static_cast<int>(n);
  if (g.lo > g.hi) throw SpecError("--grid needs lo <= hi");
  return g;
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> v;
  for (const auto& s : split(text, ',')) v.push_back(parse_number(s, "a point"));
  return v;
}

int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.command == "curvature") return cmd_curvature(cfg, out);
    if (cfg.command == "alpha") return cmd_alpha(cfg, out);
    if (cfg.command == "check") return cmd_check(cfg, out);
    if (cfg.command == "geodesic") return cmd_geodesic(cfg, out);
    if (cfg.command == "invariants") return cmd_invariants(cfg, out);
    err << "error: unknown command '" << cfg.command << "'\n";
    return kInputError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const PreconditionError& e) {
    err << "precondition failed: " << e.what() << '\n';
    return kInputError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Curvature engine for pseudo-Riemannian metrics", "kcurv"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string point, grid, velocity, target, only, order;

  const auto metric_flags = [&](CLI::App* sub) {
    sub->add_option("--family", cfg.family, "family instance, p=<int>,f=<expr>");
    sub->add_option("--spec", cfg.spec_path, "JSON metric spec file");
    sub->add_option("--point", point, "comma-separated coordinates");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.out, "output file");
    sub->add_option("--tol", cfg.tol, "tolerance override");
  };

  auto* curv = app.add_subcommand("curvature", "non-zero components of nabla^k R at a point");
  metric_flags(curv);
  curv->add_option("--k", cfg.k, "derivative order");

  auto* alpha = app.add_subcommand("alpha", "sweep the invariant alpha over a grid in y");
  alpha->add_option("--family", cfg.family, "family instance, p=<int>,f=<expr>")->required();
  alpha->add_option("--grid", grid, "var=lo:hi:n")->required();
  alpha->add_option("--out", cfg.out, "output file");
  alpha->add_option("--tol", cfg.tol, "variance threshold for the constancy verdict");

  auto* check = app.add_subcommand("check", "run the property suite");
  metric_flags(check);
  check->add_option("--only", only, "comma-separated check names");
  check->add_option("--points", cfg.points, "number of sample points");

  auto* geo = app.add_subcommand("geodesic", "integrate a geodesic and write CSV");
  metric_flags(geo);
  geo->add_option("--velocity", velocity, "initial velocity");
  geo->add_option("--target", target, "end point at t = 1");
  geo->add_option("--horizon", cfg.horizon, "final time");
  geo->add_option("--samples", cfg.samples, "number of output samples");
  geo->add_option("--method", cfg.method, "auto, rk or triangular");
  geo->add_option("--order", order, "triangular coordinate ordering, comma-separated names");

  auto* inv = app.add_subcommand("invariants", "evaluate Weyl scalar invariants at a point");
  metric_flags(inv);
  inv->add_option("--max-factors", cfg.max_factors, "catalog factor limit");
  inv->add_option("--max-deriv", cfg.max_deriv, "catalog derivative limit");
  inv->add_option("--random", cfg.random, "extra seeded random schemas");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == 0 ? kOk : kInputError;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  try {
    if (!point.empty()) cfg.point = parse_point(point);
    if (!grid.empty()) cfg.grid = parse_grid(grid);
    if (!velocity.empty()) cfg.velocity = parse_point(velocity);
    if (!target.empty()) cfg.target = parse_point(target);
    if (!only.empty()) cfg.only = split(only, ',');
    if (!order.empty()) cfg.ordering = split(order, ',');
  } catch (const Error& e) {
    err << "usage error: " << e.what() << '\n';
    return kInputError;
  }
  return execute(cfg, out, err);
}

}  // namespace kcurv::cli
