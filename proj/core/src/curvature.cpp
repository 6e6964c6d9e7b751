#include "kcurv/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "kcurv/error.hpp"

namespace kcurv {

double SparseTensor::at(const IndexTuple& slots) const {
  auto it = entries.find(slots);
  return it == entries.end() ? 0.0 : it->second;
}

double SparseTensor::max_abs() const {
  double m = 0.0;
  for (const auto& [k, v] : entries) m = std::max(m, std::abs(v));
  return m;
}

void insert_with_curvature_symmetries(SparseTensor& t, const IndexTuple& slots, double value) {
  if (slots.size() < 4) throw SpecError("curvature symmetries need at least four slots");
  if (t.valence == 0) t.valence = slots.size();
  if (t.valence != slots.size()) throw SpecError("tensor valence mismatch");
  const int i = slots[0], j = slots[1], k = slots[2], l = slots[3];
  struct Image {
    int a, b, c, d;
    double sign;
  };
  const Image images[] = {{i, j, k, l, 1},  {j, i, k, l, -1}, {i, j, l, k, -1}, {j, i, l, k, 1},
                          {k, l, i, j, 1},  {l, k, i, j, -1}, {k, l, j, i, -1}, {l, k, j, i, 1}};
  for (const auto& im : images) {
    IndexTuple s = slots;
    s[0] = im.a;
    s[1] = im.b;
    s[2] = im.c;
    s[3] = im.d;
    t.entries[s] = im.sign * value;
  }
}

double max_difference(const SparseTensor& a, const SparseTensor& b) {
  double m = 0.0;
  for (const auto& [k, v] : a.entries) m = std::max(m, std::abs(v - b.at(k)));
  for (const auto& [k, v] : b.entries) m = std::max(m, std::abs(v - a.at(k)));
  return m;
}

// ---------------------------------------------------------------------------

CurvatureEngine::CurvatureEngine(MetricSpec spec, std::vector<double> point, int metric_jet_order)
    : spec_(std::move(spec)), point_(std::move(point)), order_(metric_jet_order), m_(spec_.dimension()) {
  if (order_ < 1) throw SpecError("metric jet order must be at least 1");
  if (point_.size() != m_) {
    throw SpecError("point has " + std::to_string(point_.size()) + " coordinates, metric has " +
                    std::to_string(m_));
  }
  for (double v : point_) {
    if (!std::isfinite(v)) throw SpecError("point coordinates must be finite");
  }
  {
    // Packed memo keys must fit: m^(valence) < 2^63.
    const double bits = std::log2(static_cast<double>(std::max<std::size_t>(m_, 2))) * (order_ + 2);
    if (bits >= 63.0) throw SpecError("dimension and jet order too large for this engine");
  }

  g_ = spec_.evaluate(point_);
  spec_.validate_at(point_);
  g_inv_ = g_.fullPivLu().inverse();
  {
    // LU round-off leaves entries of order 1e-17 where the inverse has exact
    // zeros; they would destroy the sparsity every later stage relies on.
    const double cut = 1e-14 * g_inv_.cwiseAbs().maxCoeff();
    g_inv_ = g_inv_.unaryExpr([cut](double v) { return std::abs(v) <= cut ? 0.0 : v; }).eval();
  }

  const auto& deps = spec_.dependency_indices();
  chart_ = make_jet_chart(spec_.coordinates(), std::span<const std::size_t>(deps));
  jet_slot_.assign(m_, -1);
  for (std::size_t k = 0; k < deps.size(); ++k) jet_slot_[deps[k]] = static_cast<int>(k);
  const auto& vars = chart_.names;
  const int m = static_cast<int>(m_);

  g_jets_.assign(m_ * m_, Jet(vars, order_));
  for (int a = 0; a < m; ++a) {
    for (int b = a; b < m; ++b) {
      const auto& e = spec_.component(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
      Jet j = (e.kind() == Expr::Kind::Constant) ? Jet::constant(vars, order_, e.value())
                                                 : eval_jet(e, point_, chart_, order_);
      g_jets_[idx2(a, b)] = j;
      g_jets_[idx2(b, a)] = std::move(j);
    }
  }

  // g^{-1} = sum_n (-G0^{-1} G~)^n G0^{-1}, iterated as H <- G0^{-1} (I - G~ H).
  const int inv_order = order_ - 1;
  std::vector<Jet> tilde(m_ * m_);
  bool constant_metric = true;
  for (std::size_t q = 0; q < m_ * m_; ++q) {
    tilde[q] = g_jets_[q].truncated(inv_order);
    tilde[q].coefficients()[0] = 0.0;
    if (!tilde[q].is_zero()) constant_metric = false;
  }
  g_inv_jets_.assign(m_ * m_, Jet(vars, inv_order));
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) g_inv_jets_[idx2(a, b)] = Jet::constant(vars, inv_order, g_inv_(a, b));
  }
  if (!constant_metric) {
    for (int it = 0; it < inv_order; ++it) {
      std::vector<Jet> p(m_ * m_, Jet(vars, inv_order));
      for (int a = 0; a < m; ++a) {
        for (int c = 0; c < m; ++c) {
          const Jet& t = tilde[idx2(a, c)];
          if (t.is_zero()) continue;
          for (int b = 0; b < m; ++b) {
            const Jet& h = g_inv_jets_[idx2(c, b)];
            if (!h.is_zero()) p[idx2(a, b)].add_product(t, h);
          }
        }
      }
      std::vector<Jet> next(m_ * m_);
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
          Jet j = Jet::constant(vars, inv_order, g_inv_(a, b));
          for (int c = 0; c < m; ++c) {
            const double s = g_inv_(a, c);
            if (s != 0.0 && !p[idx2(c, b)].is_zero()) j.add_scaled(p[idx2(c, b)], -s);
          }
          next[idx2(a, b)] = std::move(j);
        }
      }
      g_inv_jets_ = std::move(next);
    }
  }

  // dg[x](a, b) = d_x g_ab, order K - 1.
  const int gamma_order = order_ - 1;
  std::vector<Jet> dg(m_ * m_ * m_, Jet(vars, gamma_order));
  for (int x = 0; x < m; ++x) {
    const int slot = jet_slot_[static_cast<std::size_t>(x)];
    if (slot < 0) continue;
    for (int a = 0; a < m; ++a) {
      for (int b = a; b < m; ++b) {
        const Jet& gj = g_jets_[idx2(a, b)];
        if (gj.is_zero()) continue;
        Jet d = gj.derivative(static_cast<std::size_t>(slot));
        dg[idx3(x, a, b)] = d;
        dg[idx3(x, b, a)] = std::move(d);
      }
    }
  }

  gamma_first_.assign(m_ * m_ * m_, Jet(vars, gamma_order));
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      for (int c = 0; c < m; ++c) {
        Jet& out = gamma_first_[idx3(a, b, c)];
        const Jet& t1 = dg[idx3(a, b, c)];
        const Jet& t2 = dg[idx3(b, a, c)];
        const Jet& t3 = dg[idx3(c, a, b)];
        if (!t1.is_zero()) out.add_scaled(t1, 0.5);
        if (!t2.is_zero()) out.add_scaled(t2, 0.5);
        if (!t3.is_zero()) out.add_scaled(t3, -0.5);
      }
    }
  }

  gamma_second_.assign(m_ * m_ * m_, Jet(vars, gamma_order));
  targets_.assign(m_ * m_, {});
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      for (int c = 0; c < m; ++c) {
        Jet& out = gamma_second_[idx3(a, b, c)];
        for (int d = 0; d < m; ++d) {
          const Jet& gf = gamma_first_[idx3(a, b, d)];
          const Jet& hi = g_inv_jets_[idx2(d, c)];
          if (!gf.is_zero() && !hi.is_zero()) out.add_product(gf, hi);
        }
        if (!out.is_zero()) targets_[idx2(a, b)].push_back(c);
      }
    }
  }

  const int levels = std::max(0, order_ - 1);
  memo_.resize(static_cast<std::size_t>(levels));
  support_.resize(static_cast<std::size_t>(levels));
  support_ready_.assign(static_cast<std::size_t>(levels), false);
}

std::uint64_t CurvatureEngine::key(std::span<const int> slots) const noexcept {
  std::uint64_t k = 0;
  for (auto it = slots.rbegin(); it != slots.rend(); ++it) k = k * m_ + static_cast<std::uint64_t>(*it);
  return k;
}

void CurvatureEngine::check_level(int k) const {
  if (k < 0) throw SpecError("curvature needs at least four slots");
  if (k > order_ - 2) {
    throw SpecError("nabla^" + std::to_string(k) + " R needs metric jets of order " + std::to_string(k + 2) +
                    ", engine was built with order " + std::to_string(order_));
  }
}

Jet CurvatureEngine::compute_riemann(int i, int j, int k, int l) const {
  const auto& vars = chart_.names;
  Jet out(vars, order_ - 2);
  const int si = jet_slot_[static_cast<std::size_t>(i)];
  const int sj = jet_slot_[static_cast<std::size_t>(j)];
  const Jet& gjkl = gamma_first_[idx3(j, k, l)];
  const Jet& gikl = gamma_first_[idx3(i, k, l)];
  if (si >= 0 && !gjkl.is_zero()) out.add_scaled(gjkl.derivative(static_cast<std::size_t>(si)));
  if (sj >= 0 && !gikl.is_zero()) out.add_scaled(gikl.derivative(static_cast<std::size_t>(sj)), -1.0);
  for (int c : targets_[idx2(i, k)]) {
    const Jet& b = gamma_first_[idx3(j, l, c)];
    if (!b.is_zero()) out.add_product(gamma_second_[idx3(i, k, c)], b);
  }
  for (int c : targets_[idx2(j, k)]) {
    const Jet& b = gamma_first_[idx3(i, l, c)];
    if (!b.is_zero()) out.add_product(gamma_second_[idx3(j, k, c)], b, -1.0);
  }
  return out;
}

Jet CurvatureEngine::compute_derivative_level(std::span<const int> slots) {
  const int k = static_cast<int>(slots.size()) - 4;
  const int mder = slots.back();
  const auto inner = slots.first(slots.size() - 1);
  Jet out(chart_.names, order_ - 2 - k);
  const int sm = jet_slot_[static_cast<std::size_t>(mder)];
  if (sm >= 0) {
    const Jet& base = curvature_jet(inner);
    if (!base.is_zero()) out.add_scaled(base.derivative(static_cast<std::size_t>(sm)));
  }
  IndexTuple shifted(inner.begin(), inner.end());
  for (std::size_t s = 0; s < inner.size(); ++s) {
    const int orig = shifted[s];
    for (int a : targets_[idx2(mder, orig)]) {
      shifted[s] = a;
      const Jet& t = curvature_jet(shifted);
      if (!t.is_zero()) out.add_product(gamma_second_[idx3(mder, orig, a)], t, -1.0);
    }
    shifted[s] = orig;
  }
  return out;
}

const Jet& CurvatureEngine::curvature_jet(std::span<const int> slots) {
  const int k = static_cast<int>(slots.size()) - 4;
  check_level(k);
  for (int s : slots) {
    if (s < 0 || static_cast<std::size_t>(s) >= m_) throw SpecError("tensor index out of range");
  }
  auto& memo = memo_[static_cast<std::size_t>(k)];
  const auto kk = key(slots);
  if (auto it = memo.find(kk); it != memo.end()) return it->second;
  Jet j = (k == 0) ? compute_riemann(slots[0], slots[1], slots[2], slots[3]) : compute_derivative_level(slots);
  return memo.emplace(kk, std::move(j)).first->second;
}

double CurvatureEngine::riemann(int i, int j, int k, int l) {
  const int s[4] = {i, j, k, l};
  return curvature(s);
}

const std::vector<IndexTuple>& CurvatureEngine::support(int k) {
  check_level(k);
  const auto lk = static_cast<std::size_t>(k);
  if (support_ready_[lk]) return support_[lk];
  const int m = static_cast<int>(m_);
  std::vector<IndexTuple> out;
  if (k == 0) {
    IndexTuple s(4);
    for (s[0] = 0; s[0] < m; ++s[0]) {
      for (s[1] = 0; s[1] < m; ++s[1]) {
        if (s[0] == s[1]) continue;
        for (s[2] = 0; s[2] < m; ++s[2]) {
          for (s[3] = 0; s[3] < m; ++s[3]) {
            if (s[2] == s[3]) continue;
            if (!curvature_jet(s).is_zero()) out.push_back(s);
          }
        }
      }
    }
  } else {
    // A component of level k can be non-zero only if its prefix is in the
    // level k-1 support with a live derivative direction, or if some
    // Gamma_{m s}^a maps one of its slots into that support.
    const auto& prev = support(k - 1);
    std::set<IndexTuple> cand;
    // Inverse Christoffel fan-out: for each (m, a) the list of s with Gamma_{m s}^a != 0.
    std::vector<std::vector<int>> sources(m_ * m_);
    for (int mm = 0; mm < m; ++mm) {
      for (int s = 0; s < m; ++s) {
        for (int a : targets_[idx2(mm, s)]) sources[idx2(mm, a)].push_back(s);
      }
    }
    for (const auto& t : prev) {
      IndexTuple c = t;
      c.push_back(0);
      for (int mm = 0; mm < m; ++mm) {
        c.back() = mm;
        if (jet_slot_[static_cast<std::size_t>(mm)] >= 0) cand.insert(c);
        for (std::size_t s = 0; s < t.size(); ++s) {
          const int a = t[s];
          for (int src : sources[idx2(mm, a)]) {
            IndexTuple d = c;
            d[s] = src;
            cand.insert(std::move(d));
          }
        }
      }
    }
    for (const auto& c : cand) {
      if (!curvature_jet(c).is_zero()) out.push_back(c);
    }
  }
  support_[lk] = std::move(out);
  support_ready_[lk] = true;
  return support_[lk];
}

std::vector<TensorEntry> CurvatureEngine::nonzero_components(int k, double tolerance) {
  std::vector<TensorEntry> out;
  for (const auto& s : support(k)) {
    const double v = curvature(s);
    if (std::abs(v) > tolerance) out.push_back({s, v});
  }
  return out;
}

SparseTensor CurvatureEngine::sparse_tensor(int k, double tolerance) {
  SparseTensor t;
  t.valence = static_cast<std::size_t>(k) + 4;
  for (auto& e : nonzero_components(k, tolerance)) t.entries.emplace(std::move(e.slots), e.value);
  return t;
}

double CurvatureEngine::max_abs_component(int k) {
  double m = 0.0;
  for (const auto& s : support(k)) m = std::max(m, std::abs(curvature(s)));
  return m;
}

double CurvatureEngine::evaluate(int k, std::span<const Eigen::VectorXd> args) {
  if (args.size() != static_cast<std::size_t>(k) + 4) throw SpecError("wrong number of arguments");
  for (const auto& a : args) {
    if (static_cast<std::size_t>(a.size()) != m_) throw SpecError("argument vector has wrong dimension");
  }
  double sum = 0.0;
  for (const auto& s : support(k)) {
    double w = 1.0;
    for (std::size_t q = 0; q < s.size() && w != 0.0; ++q) w *= args[q](s[q]);
    if (w != 0.0) sum += w * curvature(s);
  }
  return sum;
}

Eigen::VectorXd CurvatureEngine::evaluate_open(int k, std::span<const Eigen::VectorXd> args, int open) {
  if (args.size() != static_cast<std::size_t>(k) + 4) throw SpecError("wrong number of arguments");
  if (open < 0 || static_cast<std::size_t>(open) >= args.size()) throw SpecError("open slot out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
  for (const auto& s : support(k)) {
    double w = 1.0;
    for (std::size_t q = 0; q < s.size() && w != 0.0; ++q) {
      if (static_cast<int>(q) != open) w *= args[q](s[q]);
    }
    if (w != 0.0) out(s[static_cast<std::size_t>(open)]) += w * curvature(s);
  }
  return out;
}

// ---------------------------------------------------------------------------

TensorField::TensorField(std::shared_ptr<CurvatureEngine> engine, Kind kind, int derivative_order)
    : engine_(std::move(engine)), kind_(kind), k_(derivative_order) {
  if (kind_ != Kind::Curvature) k_ = 0;
}

std::size_t TensorField::valence() const noexcept {
  return kind_ == Kind::Curvature ? static_cast<std::size_t>(k_) + 4 : 3;
}

const Jet& TensorField::jet(std::span<const int> slots) const {
  if (slots.size() != valence()) throw SpecError("wrong number of tensor indices");
  if (kind_ == Kind::Curvature) return engine_->curvature_jet(slots);
  const auto m = static_cast<int>(engine_->dimension());
  for (int s : slots) {
    if (s < 0 || s >= m) throw SpecError("tensor index out of range");
  }
  return kind_ == Kind::ChristoffelFirst ? engine_->christoffel_first_jet(slots[0], slots[1], slots[2])
                                         : engine_->christoffel_jet(slots[0], slots[1], slots[2]);
}

double TensorField::operator()(std::span<const int> slots) const { return jet(slots).value(); }

std::vector<TensorEntry> TensorField::nonzero_components(double tolerance) const {
  if (kind_ == Kind::Curvature) return engine_->nonzero_components(k_, tolerance);
  std::vector<TensorEntry> out;
  const auto m = static_cast<int>(engine_->dimension());
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      for (int c = 0; c < m; ++c) {
        const int s[3] = {a, b, c};
        const double v = (*this)(s);
        if (std::abs(v) > tolerance) out.push_back({{a, b, c}, v});
      }
    }
  }
  return out;
}

TensorField christoffel(const MetricSpec& spec, std::span<const double> point, int jet_order, TensorField::Kind kind) {
  if (kind == TensorField::Kind::Curvature) throw SpecError("christoffel() needs a Christoffel kind");
  if (jet_order < 0) throw SpecError("jet order must be non-negative");
  auto e = std::make_shared<CurvatureEngine>(spec, std::vector<double>(point.begin(), point.end()), jet_order + 1);
  return TensorField(std::move(e), kind);
}

TensorField riemann(const MetricSpec& spec, std::span<const double> point, int jet_order) {
  if (jet_order < 0) throw SpecError("jet order must be non-negative");
  auto e = std::make_shared<CurvatureEngine>(spec, std::vector<double>(point.begin(), point.end()), jet_order + 2);
  return TensorField(std::move(e), TensorField::Kind::Curvature, 0);
}

TensorField nabla_k_R(const MetricSpec& spec, std::span<const double> point, int k) {
  if (k < 0) throw SpecError("derivative order must be non-negative");
  auto e = std::make_shared<CurvatureEngine>(spec, std::vector<double>(point.begin(), point.end()), k + 2);
  return TensorField(std::move(e), TensorField::Kind::Curvature, k);
}

}  // namespace kcurv
