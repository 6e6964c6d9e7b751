#include "kcurv/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <unordered_map>
#include <utility>

#include "kcurv/error.hpp"

namespace kcurv {

namespace {

constexpr int kBitsPerVariable = 5;

std::uint64_t pack(std::span<const std::uint8_t> m) {
  std::uint64_t key = 0;
  for (auto v : m) key = (key << kBitsPerVariable) | v;
  return key;
}

// Multi-indices of total degree d over n variables, first variable largest first.
void compositions(int n, int d, std::vector<std::uint8_t>& current, std::vector<std::uint8_t>& out) {
  if (n == 0) {
    if (d == 0) out.insert(out.end(), current.begin(), current.end());
    return;
  }
  if (n == 1) {
    current.push_back(static_cast<std::uint8_t>(d));
    out.insert(out.end(), current.begin(), current.end());
    current.pop_back();
    return;
  }
  for (int first = d; first >= 0; --first) {
    current.push_back(static_cast<std::uint8_t>(first));
    compositions(n - 1, d - first, current, out);
    current.pop_back();
  }
}

double int_factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

const VariableList& empty_variables() {
  static const VariableList empty = make_variable_list({});
  return empty;
}

void require_finite(std::span<const double> c, const char* what) {
  for (double v : c) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite jet coefficient in ") + what);
  }
}

}  // namespace

JetLayout::JetLayout(int nvars, int order) : nvars_(nvars), order_(order) {
  std::vector<std::uint8_t> current;
  for (int d = 0; d <= order; ++d) {
    const std::size_t before = indices_.size();
    if (nvars == 0) {
      if (d == 0) degrees_.push_back(0);
      continue;
    }
    compositions(nvars, d, current, indices_);
    const std::size_t added = (indices_.size() - before) / static_cast<std::size_t>(nvars);
    degrees_.insert(degrees_.end(), added, d);
  }

  std::unordered_map<std::uint64_t, std::uint32_t> lookup;
  lookup.reserve(size() * 2);
  factorials_.resize(size());
  for (std::size_t r = 0; r < size(); ++r) {
    auto m = multi_index(r);
    lookup.emplace(pack(m), static_cast<std::uint32_t>(r));
    double f = 1.0;
    for (auto v : m) f *= int_factorial(v);
    factorials_[r] = f;
  }

  // Product terms bucketed by output rank.
  std::vector<std::vector<Term>> buckets(size());
  std::vector<std::uint8_t> sum(static_cast<std::size_t>(nvars));
  for (std::size_t i = 0; i < size(); ++i) {
    const std::size_t limit = degree_begin(order - degrees_[i] + 1);
    auto mi = multi_index(i);
    for (std::size_t j = 0; j < limit; ++j) {
      auto mj = multi_index(j);
      for (int v = 0; v < nvars; ++v) sum[v] = static_cast<std::uint8_t>(mi[v] + mj[v]);
      const auto k = lookup.at(pack(sum));
      buckets[k].push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
    }
  }
  term_begin_.reserve(size() + 1);
  term_begin_.push_back(0);
  for (auto& b : buckets) {
    terms_.insert(terms_.end(), b.begin(), b.end());
    term_begin_.push_back(terms_.size());
  }

  raised_stride_ = order > 0 ? degree_begin(order) : 0;
  raised_.resize(raised_stride_ * static_cast<std::size_t>(nvars));
  for (int v = 0; v < nvars; ++v) {
    for (std::size_t r = 0; r < raised_stride_; ++r) {
      auto m = multi_index(r);
      std::copy(m.begin(), m.end(), sum.begin());
      ++sum[v];
      raised_[static_cast<std::size_t>(v) * raised_stride_ + r] = lookup.at(pack(sum));
    }
  }
}

std::shared_ptr<const JetLayout> JetLayout::get(int nvars, int order) {
  if (nvars < 0 || nvars > kMaxVariables) {
    throw SpecError("jet variable count " + std::to_string(nvars) + " outside [0, " +
                    std::to_string(kMaxVariables) + "]");
  }
  if (order < 0 || order > kMaxOrder) {
    throw SpecError("jet order " + std::to_string(order) + " outside [0, " + std::to_string(kMaxOrder) + "]");
  }
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetLayout>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{nvars, order}];
  if (!slot) slot = std::shared_ptr<const JetLayout>(new JetLayout(nvars, order));
  return slot;
}

std::size_t JetLayout::degree_begin(int d) const {
  if (d <= 0) return 0;
  if (d > order_) return size();
  // C(d - 1 + n, n)
  double c = 1.0;
  for (int i = 1; i <= nvars_; ++i) c = c * (d - 1 + i) / i;
  return static_cast<std::size_t>(std::llround(c));
}

std::size_t JetLayout::rank(std::span<const int> m) const {
  if (m.size() != static_cast<std::size_t>(nvars_)) {
    throw SpecError("multi-index has " + std::to_string(m.size()) + " entries, jet has " +
                    std::to_string(nvars_) + " variables");
  }
  int degree = 0;
  for (int v : m) {
    if (v < 0) throw SpecError("negative multi-index entry");
    degree += v;
  }
  if (degree > order_) {
    throw SpecError("multi-index of degree " + std::to_string(degree) + " exceeds jet order " +
                    std::to_string(order_));
  }
  // Linear scan within the degree block; only used off the hot path.
  for (std::size_t r = degree_begin(degree); r < degree_begin(degree + 1); ++r) {
    auto mi = multi_index(r);
    if (std::equal(mi.begin(), mi.end(), m.begin(), [](std::uint8_t a, int b) { return a == b; })) return r;
  }
  throw SpecError("multi-index not found in jet layout");
}

VariableList make_variable_list(std::vector<std::string> names) {
  return std::make_shared<const std::vector<std::string>>(std::move(names));
}

Jet::Jet() : Jet(empty_variables(), 0) {}

Jet::Jet(VariableList vars, int order)
    : vars_(std::move(vars)),
      layout_(JetLayout::get(static_cast<int>(vars_->size()), order)),
      coeffs_(layout_->size(), 0.0) {}

Jet Jet::constant(VariableList vars, int order, double value) {
  Jet j(std::move(vars), order);
  j.coeffs_[0] = value;
  return j;
}

Jet Jet::variable(VariableList vars, int order, std::size_t var, double base) {
  if (var >= vars->size()) throw SpecError("jet variable index out of range");
  Jet j(std::move(vars), order);
  j.coeffs_[0] = base;
  if (order >= 1) j.coeffs_[1 + var] = 1.0;
  return j;
}

double Jet::coefficient(std::span<const int> m) const { return coeffs_[layout_->rank(m)]; }

double Jet::partial(std::span<const int> m) const {
  const auto r = layout_->rank(m);
  return layout_->factorial(r) * coeffs_[r];
}

bool Jet::is_zero() const noexcept {
  return std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return c == 0.0; });
}

Jet Jet::truncated(int order) const {
  if (order > this->order()) throw SpecError("cannot truncate a jet to a higher order");
  Jet out(vars_, order);
  std::copy_n(coeffs_.begin(), out.coeffs_.size(), out.coeffs_.begin());
  return out;
}

Jet Jet::derivative(std::size_t var) const {
  if (order() < 1) throw SpecError("derivative of an order-0 jet");
  if (var >= nvars()) throw SpecError("jet variable index out of range");
  Jet out(vars_, order() - 1);
  auto raised = layout_->raised(static_cast<int>(var));
  for (std::size_t r = 0; r < out.coeffs_.size(); ++r) {
    const double mult = out.layout_->multi_index(r)[var] + 1.0;
    out.coeffs_[r] = mult * coeffs_[raised[r]];
  }
  return out;
}

void Jet::require_compatible(const Jet& other, bool same_order) const {
  if (vars_ != other.vars_ && *vars_ != *other.vars_) {
    throw SpecError("jet operands have different variable lists");
  }
  if (same_order && order() != other.order()) {
    throw SpecError("jet operands have different orders (" + std::to_string(order()) + " vs " +
                    std::to_string(other.order()) + ")");
  }
}

void Jet::add_product(const Jet& a, const Jet& b, double scale) {
  require_compatible(a, false);
  require_compatible(b, false);
  if (a.order() < order() || b.order() < order()) {
    throw SpecError("jet product operands have lower order than the result");
  }
  if (a.is_zero() || b.is_zero()) return;
  const double* pa = a.coeffs_.data();
  const double* pb = b.coeffs_.data();
  for (std::size_t k = 0; k < coeffs_.size(); ++k) {
    double s = 0.0;
    for (const auto& t : layout_->product_terms(k)) s += pa[t.lhs] * pb[t.rhs];
    coeffs_[k] += scale * s;
  }
}

void Jet::add_scaled(const Jet& a, double scale) {
  require_compatible(a, false);
  if (a.order() < order()) throw SpecError("jet operand has lower order than the result");
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += scale * a.coeffs_[k];
}

Jet& Jet::operator+=(const Jet& other) {
  require_compatible(other, true);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += other.coeffs_[k];
  return *this;
}

Jet& Jet::operator-=(const Jet& other) {
  require_compatible(other, true);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] -= other.coeffs_[k];
  return *this;
}

Jet& Jet::operator*=(double s) noexcept {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

Jet operator*(const Jet& a, const Jet& b) {
  a.require_compatible(b, true);
  return multiply(a, b, a.order());
}

Jet multiply(const Jet& a, const Jet& b, int order) {
  Jet out(a.variable_list(), order);
  out.add_product(a, b);
  return out;
}

// The homogeneous parts of E = exp(a) obey d * E_d = sum_j j * a_j * E_{d-j}
// (apply the Euler operator to E' = a' E). Walking the product terms in output
// rank order guarantees E_{d-j} is final before degree d is reached.
Jet exp(const Jet& a) {
  Jet e(a.variable_list(), a.order());
  const auto& layout = a.layout();
  auto c = a.coefficients();
  auto out = e.coefficients();
  out[0] = std::exp(c[0]);
  for (std::size_t k = 1; k < out.size(); ++k) {
    double s = 0.0;
    for (const auto& t : layout.product_terms(k)) {
      const int d = layout.degree(t.lhs);
      if (d > 0) s += d * c[t.lhs] * out[t.rhs];
    }
    out[k] = s / layout.degree(k);
  }
  require_finite(out, "exp");
  return e;
}

namespace {

// S' = C a', C' = -S a' in the same degree filtration as exp.
std::pair<Jet, Jet> sin_cos(const Jet& a) {
  Jet s(a.variable_list(), a.order());
  Jet c(a.variable_list(), a.order());
  const auto& layout = a.layout();
  auto in = a.coefficients();
  auto so = s.coefficients();
  auto co = c.coefficients();
  so[0] = std::sin(in[0]);
  co[0] = std::cos(in[0]);
  for (std::size_t k = 1; k < so.size(); ++k) {
    double ss = 0.0;
    double cs = 0.0;
    for (const auto& t : layout.product_terms(k)) {
      const int d = layout.degree(t.lhs);
      if (d > 0) {
        ss += d * in[t.lhs] * co[t.rhs];
        cs -= d * in[t.lhs] * so[t.rhs];
      }
    }
    so[k] = ss / layout.degree(k);
    co[k] = cs / layout.degree(k);
  }
  require_finite(so, "sin");
  require_finite(co, "cos");
  return {std::move(s), std::move(c)};
}

}  // namespace

Jet sin(const Jet& a) { return sin_cos(a).first; }
Jet cos(const Jet& a) { return sin_cos(a).second; }

Jet pow(const Jet& a, unsigned exponent) {
  Jet result = Jet::constant(a.variable_list(), a.order(), 1.0);
  Jet base = a;
  while (exponent > 0) {
    if (exponent & 1U) result = result * base;
    exponent >>= 1U;
    if (exponent > 0) base = base * base;
  }
  require_finite(result.coefficients(), "pow");
  return result;
}

}  // namespace kcurv
