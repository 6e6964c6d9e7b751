#include "kcurv/metric.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kcurv/error.hpp"

namespace kcurv {

MetricSpec::MetricSpec(std::vector<std::string> coordinates, Signature signature)
    : coordinates_(std::move(coordinates)),
      signature_(signature),
      components_(coordinates_.size() * coordinates_.size()) {
  if (coordinates_.empty()) throw SpecError("metric needs at least one coordinate");
  std::set<std::string> seen;
  for (const auto& c : coordinates_) {
    if (c.empty()) throw SpecError("empty coordinate name");
    if (!seen.insert(c).second) throw SpecError("duplicate coordinate '" + c + "'");
  }
  if (signature_.negative < 0 || signature_.positive < 0 ||
      static_cast<std::size_t>(signature_.negative + signature_.positive) != coordinates_.size()) {
    throw SpecError("signature (" + std::to_string(signature_.negative) + "," +
                    std::to_string(signature_.positive) + ") does not add up to dimension " +
                    std::to_string(coordinates_.size()));
  }
}

std::optional<std::size_t> MetricSpec::coordinate_index(std::string_view name) const {
  auto it = std::find(coordinates_.begin(), coordinates_.end(), name);
  if (it == coordinates_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - coordinates_.begin());
}

void MetricSpec::set_component(std::size_t i, std::size_t j, Expr value) {
  const auto m = dimension();
  if (i >= m || j >= m) throw SpecError("metric component index out of range");
  for (auto v : free_var_indices(value)) {
    if (v >= m) throw SpecError("metric component refers to a coordinate outside the chart");
  }
  components_[i * m + j] = value;
  components_[j * m + i] = std::move(value);
  refresh_dependencies();
}

void MetricSpec::set_component(std::size_t i, std::size_t j, std::string_view text) {
  set_component(i, j, parse(text, coordinates_));
}

void MetricSpec::refresh_dependencies() {
  std::set<std::size_t> deps;
  for (const auto& c : components_) {
    for (auto v : free_var_indices(c)) deps.insert(v);
  }
  dependencies_.assign(deps.begin(), deps.end());
}

Eigen::MatrixXd MetricSpec::evaluate(std::span<const double> point) const {
  const auto m = dimension();
  if (point.size() != m) {
    throw SpecError("point has " + std::to_string(point.size()) + " coordinates, metric has " + std::to_string(m));
  }
  Eigen::MatrixXd g(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double v = kcurv::evaluate<double>(component(i, j), point);
      if (!std::isfinite(v)) throw NumericError("metric component is not finite at the probed point");
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

InertiaCount inertia(const Eigen::MatrixXd& symmetric, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::EigenvaluesOnly);
  InertiaCount out;
  const double scale = std::max(1.0, symmetric.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double l = solver.eigenvalues()(i);
    if (std::abs(l) <= tol * scale) {
      ++out.zero;
    } else if (l < 0) {
      ++out.negative;
    } else {
      ++out.positive;
    }
  }
  return out;
}

void MetricSpec::validate_at(std::span<const double> point) const {
  const auto g = evaluate(point);
  const auto in = inertia(g);
  if (in.zero > 0) throw NumericError("metric is singular at the probed point");
  if (in.negative != signature_.negative || in.positive != signature_.positive) {
    throw SpecError("metric has signature (" + std::to_string(in.negative) + "," + std::to_string(in.positive) +
                    ") at the probed point, declared (" + std::to_string(signature_.negative) + "," +
                    std::to_string(signature_.positive) + ")");
  }
}

MetricSpec MetricSpec::from_json(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError(std::string("metric spec is not valid JSON: ") + e.what());
  }
  try {
    auto coords = doc.at("coords").get<std::vector<std::string>>();
    if (doc.contains("dim") && doc.at("dim").get<std::size_t>() != coords.size()) {
      throw SpecError("metric spec 'dim' disagrees with the number of coordinates");
    }
    auto sig = doc.at("signature").get<std::vector<int>>();
    if (sig.size() != 2) throw SpecError("metric spec 'signature' must be [negative, positive]");
    MetricSpec spec(std::move(coords), Signature{sig[0], sig[1]});
    for (const auto& c : doc.at("components")) {
      spec.set_component(c.at("i").get<std::size_t>(), c.at("j").get<std::size_t>(),
                         c.at("expr").get<std::string>());
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed metric spec: ") + e.what());
  }
}

MetricSpec MetricSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open metric spec '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string MetricSpec::to_json() const {
  nlohmann::json doc;
  doc["dim"] = dimension();
  doc["coords"] = coordinates_;
  doc["signature"] = {signature_.negative, signature_.positive};
  auto comps = nlohmann::json::array();
  const auto m = dimension();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const auto& e = component(i, j);
      if (e.kind() == Expr::Kind::Constant && e.value() == 0.0) continue;
      comps.push_back({{"i", i}, {"j", j}, {"expr", to_string(e)}});
    }
  }
  doc["components"] = comps;
  return doc.dump(2);
}

}  // namespace kcurv
