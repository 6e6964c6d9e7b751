#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "kcurv/error.hpp"
#include "kcurv/family.hpp"

namespace kcurv {

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

std::vector<std::string> frame_names(int p) {
  std::vector<std::string> n{"X", "Y"};
  for (int i = 0; i <= p; ++i) n.push_back("Z" + std::to_string(i));
  n.push_back("Xb");
  n.push_back("Yb");
  for (int i = 0; i <= p; ++i) n.push_back("Zb" + std::to_string(i));
  return n;
}

}  // namespace

Frame normalize_frame(const FamilyParams& params, std::span<const double> point, bool rescale) {
  const int p = params.p;
  const int m = params.dimension();
  const FamilyIndex ix{p};
  if (point.size() != static_cast<std::size_t>(m)) throw SpecError("point has the wrong dimension");
  if (rescale) require_positivity(params, point[1]);

  Frame fr;
  fr.p = p;
  fr.names = frame_names(p);
  fr.a.assign(static_cast<std::size_t>(p + 1), 0.0);
  fr.b = Eigen::MatrixXd::Zero(p + 1, p + 1);

  if (p >= 0) {
    CurvatureEngine engine(build_metric(params), std::vector<double>(point.begin(), point.end()), p + 2);
    // D[k] = nabla^k R(dx, dy, dy, dx; dy..), M[k][i] = nabla^k R(dx, dy, dz_i, dx; dy..).
    std::vector<double> d(static_cast<std::size_t>(p + 1));
    std::vector<std::vector<double>> mm(static_cast<std::size_t>(p + 1), std::vector<double>(static_cast<std::size_t>(p + 1)));
    for (int k = 0; k <= p; ++k) {
      IndexTuple s{ix.x(), ix.y(), ix.y(), ix.x()};
      s.resize(static_cast<std::size_t>(k) + 4, ix.y());
      d[static_cast<std::size_t>(k)] = engine.curvature(s);
      for (int i = 0; i <= p; ++i) {
        s[2] = ix.z(i);
        mm[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = engine.curvature(s);
      }
      const double pivot = mm[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
      if (std::abs(pivot - factorial(k + 1)) > 1e-9 * factorial(k + 1)) {
        throw NumericError("triangular pivot at level " + std::to_string(k) + " is " + std::to_string(pivot) +
                           ", expected " + std::to_string(factorial(k + 1)));
      }
    }
    const auto M = [&](int k, int i) { return mm[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]; };

    // nabla^k R(X, Y, Y, X; Y..) = D_k + (k + 2) sum_j a^j M_{k,j} = 0, top level first.
    for (int k = p; k >= 0; --k) {
      double rhs = d[static_cast<std::size_t>(k)];
      for (int j = k + 1; j <= p; ++j) rhs += (k + 2) * fr.a[static_cast<std::size_t>(j)] * M(k, j);
      fr.a[static_cast<std::size_t>(k)] = -rhs / ((k + 2) * factorial(k + 1));
    }
    // nabla^k R(X, Y, Z_j, X; Y..) = sum_{k<=i<=j} b_j^i M_{k,i} = delta_jk, highest superscript first.
    for (int i = p; i >= 0; --i) {
      for (int j = i; j <= p; ++j) {
        double rhs = (i == j) ? 1.0 : 0.0;
        for (int l = i + 1; l <= j; ++l) rhs -= fr.b(j, l) * M(i, l);
        fr.b(j, i) = rhs / factorial(i + 1);
      }
    }
  }

  const auto g = build_metric(params).evaluate(point);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, m);
  e(ix.x(), 0) = 1.0;
  e(ix.xb(), 0) = -0.5 * g(ix.x(), ix.x());
  e(ix.y(), 1) = 1.0;
  for (int j = 0; j <= p; ++j) e(ix.z(j), 1) = fr.a[static_cast<std::size_t>(j)];
  for (int i = 0; i <= p; ++i) {
    for (int j = 0; j <= i; ++j) e(ix.z(j), 2 + i) = fr.b(i, j);
  }
  const int bar0 = p + 3;
  e(ix.xb(), bar0) = 1.0;
  e(ix.yb(), bar0 + 1) = 1.0;
  if (p >= 0) {
    const Eigen::MatrixXd bh = fr.b.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
    for (int i = 0; i <= p; ++i) {
      double ycoef = 0.0;
      for (int j = 0; j <= p; ++j) {
        ycoef -= fr.a[static_cast<std::size_t>(j)] * bh(j, i);
        e(ix.zb(j), bar0 + 2 + i) = bh(j, i);
      }
      e(ix.yb(), bar0 + 2 + i) = ycoef;
    }
  }

  if (rescale) {
    const auto fd = profile_derivatives(params, point[1], p + 4);
    const double f3 = fd[static_cast<std::size_t>(p + 3)];
    const double f4 = fd[static_cast<std::size_t>(p + 4)];
    fr.eps1 = f3 / f4;
    fr.eps0 = 1.0 / std::sqrt(std::pow(fr.eps1, p + 3) * f3);
    const double e0 = fr.eps0, e1 = fr.eps1;
    e.col(0) *= e0;
    e.col(1) *= e1;
    for (int i = 0; i <= p; ++i) e.col(2 + i) *= std::pow(e0, -2) * std::pow(e1, -i - 1);
    e.col(bar0) /= e0;
    e.col(bar0 + 1) /= e1;
    for (int i = 0; i <= p; ++i) e.col(bar0 + 2 + i) *= e0 * e0 * std::pow(e1, i + 1);
    fr.rescaled = true;
  }
  fr.vectors = std::move(e);
  return fr;
}

Eigen::MatrixXd frame_gram(const FamilyParams& params, std::span<const double> point, const Frame& frame) {
  const auto g = build_metric(params).evaluate(point);
  return frame.vectors.transpose() * g * frame.vectors;
}

SparseTensor change_basis(const SparseTensor& t, const Eigen::MatrixXd& basis, double drop_below) {
  const auto n = basis.cols();
  // For each coordinate index, the basis vectors with a non-zero component there.
  std::vector<std::vector<std::pair<int, double>>> fan(static_cast<std::size_t>(basis.rows()));
  for (Eigen::Index c = 0; c < basis.rows(); ++c) {
    for (Eigen::Index q = 0; q < n; ++q) {
      if (basis(c, q) != 0.0) fan[static_cast<std::size_t>(c)].emplace_back(static_cast<int>(q), basis(c, q));
    }
  }
  SparseTensor out;
  out.valence = t.valence;
  IndexTuple idx(t.valence);
  for (const auto& [slots, value] : t.entries) {
    // Odometer over the fan-out of every slot.
    std::vector<std::size_t> pos(slots.size(), 0);
    bool empty = false;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (fan[static_cast<std::size_t>(slots[s])].empty()) empty = true;
    }
    if (empty) continue;
    while (true) {
      double w = value;
      for (std::size_t s = 0; s < slots.size(); ++s) {
        const auto& [q, c] = fan[static_cast<std::size_t>(slots[s])][pos[s]];
        idx[s] = q;
        w *= c;
      }
      out.entries[idx] += w;
      std::size_t s = 0;
      for (; s < slots.size(); ++s) {
        if (++pos[s] < fan[static_cast<std::size_t>(slots[s])].size()) break;
        pos[s] = 0;
      }
      if (s == slots.size()) break;
    }
  }
  for (auto it = out.entries.begin(); it != out.entries.end();) {
    if (std::abs(it->second) <= drop_below) {
      it = out.entries.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

CurvatureModel family_model(int p, int k) {
  if (p < -1) throw SpecError("family parameter p must be at least -1");
  if (k < 0) throw SpecError("model level must be non-negative");
  CurvatureModel model;
  model.dimension = 2 * p + 6;
  const int bar0 = p + 3;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(model.dimension, model.dimension);
  for (int q = 0; q < bar0; ++q) {
    g(q, bar0 + q) = 1.0;
    g(bar0 + q, q) = 1.0;
  }
  model.inner_product = g;
  const int X = 0, Y = 1;
  for (int l = 0; l <= k; ++l) {
    SparseTensor a;
    a.valence = static_cast<std::size_t>(l) + 4;
    IndexTuple base{X, Y, Y, X};
    base.resize(a.valence, Y);
    if (l <= p) {
      const int z = 2 + l;
      IndexTuple s = base;
      s[2] = z;
      insert_with_curvature_symmetries(a, s, 1.0);
      for (std::size_t d = 4; d < a.valence; ++d) {
        IndexTuple r = base;
        r[d] = z;
        insert_with_curvature_symmetries(a, r, 1.0);
      }
    } else {
      // Levels above p + 2 carry the values of the exponential profile.
      insert_with_curvature_symmetries(a, base, 1.0);
    }
    model.tensors.push_back(std::move(a));
  }
  return model;
}

CurvatureModel quotient_model() {
  CurvatureModel model;
  model.dimension = 3;
  SparseTensor b;
  insert_with_curvature_symmetries(b, {0, 1, 2, 0}, 1.0);
  model.tensors.push_back(std::move(b));
  return model;
}

Eigen::MatrixXd model_kernel(const CurvatureModel& model, double rank_tolerance) {
  const int n = model.dimension;
  if (n <= 0) throw SpecError("model dimension must be positive");
  if (model.tensors.empty()) throw SpecError("model carries no A^0");
  const auto& a0 = model.tensors.front();
  std::map<IndexTuple, int> rows;
  for (const auto& [s, v] : a0.entries) {
    if (v != 0.0) rows.emplace(IndexTuple(s.begin(), s.begin() + 3), 0);
  }
  if (rows.empty()) return Eigen::MatrixXd::Identity(n, n);
  int r = 0;
  for (auto& [key, row] : rows) row = r++;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(r, n);
  for (const auto& [s, v] : a0.entries) {
    if (v == 0.0) continue;
    if (s[3] < 0 || s[3] >= n) throw SpecError("model tensor index out of range");
    a(rows.at(IndexTuple(s.begin(), s.begin() + 3)), s[3]) += v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index q = 0; q < sv.size(); ++q) {
    if (sv(q) > rank_tolerance) ++rank;
  }
  return svd.matrixV().rightCols(n - rank);
}

ModelAgreement compare_with_model(const FamilyParams& params, std::span<const double> point, const Frame& frame,
                                  int k) {
  ModelAgreement out;
  const auto model = family_model(params.p, k);
  out.gram_deviation = (frame_gram(params, point, frame) - *model.inner_product).cwiseAbs().maxCoeff();
  CurvatureEngine engine(build_metric(params), std::vector<double>(point.begin(), point.end()), k + 2);
  for (int l = 0; l <= k; ++l) {
    const auto t = change_basis(engine.sparse_tensor(l), frame.vectors);
    out.max_deviation.push_back(max_difference(t, model.tensors[static_cast<std::size_t>(l)]));
  }
  return out;
}

}  // namespace kcurv
