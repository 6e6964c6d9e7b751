#pragma once

// Levi-Civita connection, curvature and its covariant derivatives at a point.
//
// Conventions:
//   Gamma_{abc}   = g(nabla_a d_b, d_c) = 1/2 (d_a g_bc + d_b g_ac - d_c g_ab)
//   Gamma_{ab}^c  = Gamma_{abd} g^{dc}
//   R(X,Y,Z,W)    = g((nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y]) Z, W)
//   (nabla^k R)_{i1 i2 i3 i4; m1 .. mk}, derivative slots last.
//
// Every quantity is carried as a jet in the coordinates the metric actually
// depends on. Computing nabla^k R needs metric jets of order k + 2; an engine
// built with metric jet order K serves every k <= K - 2.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "kcurv/jet.hpp"
#include "kcurv/metric.hpp"

namespace kcurv {

using IndexTuple = std::vector<int>;

struct TensorEntry {
  IndexTuple slots;
  double value = 0.0;
};

/// Ordered sparse tensor used for closed forms, models and basis changes.
struct SparseTensor {
  std::size_t valence = 0;
  std::map<IndexTuple, double> entries;

  double at(const IndexTuple& slots) const;
  double max_abs() const;
};

/// Sets `value` at `slots` and at its images under R_ijkl = -R_jikl = -R_ijlk = R_klij
/// acting on the first four slots.
void insert_with_curvature_symmetries(SparseTensor& t, const IndexTuple& slots, double value);

/// Largest |a - b| over the union of both supports.
double max_difference(const SparseTensor& a, const SparseTensor& b);

/// Per-point evaluation context. Component access is on demand and memoized;
/// nothing of valence > 4 is ever materialized densely. Not thread-safe: use
/// one engine per worker.
class CurvatureEngine {
 public:
  CurvatureEngine(MetricSpec spec, std::vector<double> point, int metric_jet_order);

  /// Engine able to serve nabla^k R for every k <= max_derivative_order.
  static CurvatureEngine for_derivative_order(MetricSpec spec, std::vector<double> point, int max_derivative_order) {
    return CurvatureEngine(std::move(spec), std::move(point), max_derivative_order + 2);
  }

  std::size_t dimension() const noexcept { return m_; }
  int metric_jet_order() const noexcept { return order_; }
  int max_derivative_order() const noexcept { return order_ - 2; }
  const MetricSpec& spec() const noexcept { return spec_; }
  std::span<const double> point() const noexcept { return point_; }
  const VariableList& jet_variables() const noexcept { return chart_.names; }

  const Eigen::MatrixXd& metric() const noexcept { return g_; }
  const Eigen::MatrixXd& inverse_metric() const noexcept { return g_inv_; }
  const Jet& metric_jet(int a, int b) const { return g_jets_[idx2(a, b)]; }
  const Jet& inverse_metric_jet(int a, int b) const { return g_inv_jets_[idx2(a, b)]; }

  const Jet& christoffel_first_jet(int a, int b, int c) const { return gamma_first_[idx3(a, b, c)]; }
  const Jet& christoffel_jet(int a, int b, int c) const { return gamma_second_[idx3(a, b, c)]; }
  double christoffel_first(int a, int b, int c) const { return christoffel_first_jet(a, b, c).value(); }
  double christoffel(int a, int b, int c) const { return christoffel_jet(a, b, c).value(); }
  /// Upper indices c for which the jet of Gamma_{ab}^c is not identically zero.
  const std::vector<int>& christoffel_targets(int a, int b) const { return targets_[idx2(a, b)]; }

  /// Jet of (nabla^k R) at `slots` (k = slots.size() - 4), of order K - 2 - k.
  const Jet& curvature_jet(std::span<const int> slots);
  double curvature(std::span<const int> slots) { return curvature_jet(slots).value(); }
  double riemann(int i, int j, int k, int l);

  /// Index tuples of nabla^k R whose jets are not identically zero, found by
  /// propagating the support of nabla^(k-1) R through the recursion.
  const std::vector<IndexTuple>& support(int k);
  std::vector<TensorEntry> nonzero_components(int k, double tolerance = 0.0);
  SparseTensor sparse_tensor(int k, double tolerance = 0.0);
  double max_abs_component(int k);

  /// nabla^k R(args[0], ..., args[3+k]) for coordinate-component vectors.
  double evaluate(int k, std::span<const Eigen::VectorXd> args);
  /// Covector w_d = nabla^k R(args with slot `open` replaced by d_d); args[open] is ignored.
  Eigen::VectorXd evaluate_open(int k, std::span<const Eigen::VectorXd> args, int open);

 private:
  std::size_t idx2(int a, int b) const noexcept { return static_cast<std::size_t>(a) * m_ + static_cast<std::size_t>(b); }
  std::size_t idx3(int a, int b, int c) const noexcept {
    return (static_cast<std::size_t>(a) * m_ + static_cast<std::size_t>(b)) * m_ + static_cast<std::size_t>(c);
  }
  std::uint64_t key(std::span<const int> slots) const noexcept;
  void check_level(int k) const;
  Jet compute_riemann(int i, int j, int k, int l) const;
  Jet compute_derivative_level(std::span<const int> slots);

  MetricSpec spec_;
  std::vector<double> point_;
  int order_;
  std::size_t m_;
  JetChart chart_;
  std::vector<int> jet_slot_;  // chart index -> jet variable, or -1

  Eigen::MatrixXd g_;
  Eigen::MatrixXd g_inv_;
  std::vector<Jet> g_jets_;
  std::vector<Jet> g_inv_jets_;
  std::vector<Jet> gamma_first_;
  std::vector<Jet> gamma_second_;
  std::vector<std::vector<int>> targets_;

  std::vector<std::unordered_map<std::uint64_t, Jet>> memo_;
  std::vector<std::vector<IndexTuple>> support_;
  std::vector<bool> support_ready_;
};

/// Read-only view onto one tensor of an engine.
class TensorField {
 public:
  enum class Kind { ChristoffelFirst, ChristoffelSecond, Curvature };

  TensorField(std::shared_ptr<CurvatureEngine> engine, Kind kind, int derivative_order = 0);

  Kind kind() const noexcept { return kind_; }
  std::size_t valence() const noexcept;
  int derivative_order() const noexcept { return k_; }
  CurvatureEngine& engine() const noexcept { return *engine_; }

  double operator()(std::span<const int> slots) const;
  double operator()(std::initializer_list<int> slots) const {
    return (*this)(std::span<const int>(slots.begin(), slots.size()));
  }
  const Jet& jet(std::span<const int> slots) const;
  std::vector<TensorEntry> nonzero_components(double tolerance = 0.0) const;

 private:
  std::shared_ptr<CurvatureEngine> engine_;
  Kind kind_;
  int k_;
};

/// Christoffel symbols as jets of order `jet_order`; both kinds share the engine.
TensorField christoffel(const MetricSpec& spec, std::span<const double> point, int jet_order,
                        TensorField::Kind kind = TensorField::Kind::ChristoffelSecond);
/// Riemann tensor, components carried as jets of order `jet_order`.
TensorField riemann(const MetricSpec& spec, std::span<const double> point, int jet_order = 0);
/// nabla^k R with exactly the minimal metric jet order k + 2.
TensorField nabla_k_R(const MetricSpec& spec, std::span<const double> point, int k);

// ---------------------------------------------------------------------------
// Contractions and curvature operators (operators.cpp)

/// rho_jk = sum g^il R_ijkl.
Eigen::MatrixXd ricci(CurvatureEngine& engine);
/// tau = sum g^ij g^kl R_iklj.
double scalar_curvature(CurvatureEngine& engine);

struct Operator {
  Eigen::MatrixXd matrix;  // acts on coordinate-component column vectors
  std::vector<double> point;
  std::vector<Eigen::VectorXd> defining_vectors;
};

/// J(X) with g(J(X)Y, Z) = R(Y, X, X, Z).
Operator jacobi_operator(CurvatureEngine& engine, const Eigen::VectorXd& x);
/// R(pi) = R(e1', e2') for an oriented orthonormal basis of span{e1, e2}.
/// Throws NumericError if the plane is degenerate (|det Gram| <= 1e-12).
Operator skew_curvature_operator(CurvatureEngine& engine, const Eigen::VectorXd& e1, const Eigen::VectorXd& e2);

/// True iff at the engine's point nabla of every coordinate field in `v`
/// lies in span(v_bar) and nabla of every field in `v_bar` vanishes.
bool triangularity_probe(const CurvatureEngine& engine, std::span<const int> v, std::span<const int> v_bar,
                         double tolerance = 1e-12);

}  // namespace kcurv
