#pragma once

// The family M_{2p+6,f}: metric, closed-form curvature, the invariant alpha,
// the normalized frame and the kernel computations on curvature models.
//
// Coordinates are ordered (x, y, z0..zp, xb, yb, zb0..zbp); p = -1 is the
// four-dimensional case (x, y, xb, yb) with F = f(y).

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kcurv/curvature.hpp"
#include "kcurv/expr.hpp"
#include "kcurv/metric.hpp"

namespace kcurv {

struct FamilyParams {
  int p = 0;
  std::string f_text = "exp(y)";
  Expr f;  // parsed against the one-variable chart {"y"}

  static FamilyParams make(int p, std::string_view f_text);
  /// {"p": int, "f": "<expr text>"}
  static FamilyParams from_json(std::string_view json_text);
  std::string to_json() const;

  int dimension() const noexcept { return 2 * p + 6; }
};

/// Chart positions of the named coordinates.
struct FamilyIndex {
  int p;
  int x() const noexcept { return 0; }
  int y() const noexcept { return 1; }
  int z(int i) const noexcept { return 2 + i; }
  int xb() const noexcept { return p + 3; }
  int yb() const noexcept { return p + 4; }
  int zb(int i) const noexcept { return p + 5 + i; }
};

std::vector<std::string> family_coordinates(int p);
/// F = f(y) + y z0 + ... + y^(p+1) zp as an expression over the full chart.
Expr family_potential(const FamilyParams& params);
MetricSpec build_metric(const FamilyParams& params);

/// f(y), f'(y), ..., f^(n)(y).
std::vector<double> profile_derivatives(const FamilyParams& params, double y, int n);

/// d_y^n F at a chart point.
double potential_y_derivative(const FamilyParams& params, std::span<const double> point, int n);
/// d_{z_i} d_y^n F at a chart point.
double potential_mixed_derivative(const FamilyParams& params, std::span<const double> point, int i, int n);

/// Closed-form non-zero components of nabla^k R, expanded over the symmetries
/// of the first four slots.
SparseTensor oracle_nabla_k_R(const FamilyParams& params, std::span<const double> point, int k);

/// Throws PreconditionError unless f^(p+3)(y) > 0 and f^(p+4)(y) > 0.
void require_positivity(const FamilyParams& params, double y);

/// f^(p+3) f^(p+5) / (f^(p+4))^2.
double alpha_closed_form(const FamilyParams& params, double y);
/// d alpha / dy.
double alpha_prime(const FamilyParams& params, double y);

/// J_k(Y)X, the vector with g(J_k(Y)X, W) = nabla^k R(X, Y, Y, W; Y, ..., Y).
Eigen::VectorXd generalized_jacobi(CurvatureEngine& engine, int k, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct AlphaSample {
  double alpha = 0.0;
  Eigen::VectorXd j1, j2, j3;  // J_{p+1}, J_{p+2}, J_{p+3} applied to X
};

/// h(J_{p+1}X, J_{p+3}X) / h(J_{p+2}X, J_{p+2}X) with h positive definite.
/// Throws NumericError when J_{p+1}(Y)X vanishes (ill-posed sample).
AlphaSample alpha_via_jacobi(const FamilyParams& params, std::span<const double> point, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y, const Eigen::MatrixXd& h);
/// Same, on an engine already built with metric jet order >= p + 5.
AlphaSample alpha_via_jacobi(CurvatureEngine& engine, int p, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& h);

// ---------------------------------------------------------------------------
// Frames and models

struct Frame {
  int p = 0;
  std::vector<std::string> names;  // X, Y, Z0.., Xb, Yb, Zb0..
  Eigen::MatrixXd vectors;         // column n is basis vector n in coordinate components
  std::vector<double> a;           // a^j
  Eigen::MatrixXd b;               // b(i, j) = b_i^j, lower triangular
  double eps0 = 1.0;
  double eps1 = 1.0;
  bool rescaled = false;
};

/// Solves for the frame in which nabla^0 .. nabla^p R take their model values.
/// With `rescale` (the default) also applies the epsilon rescaling, which needs
/// f^(p+3) > 0 and f^(p+4) > 0 at the point, so that nabla^(p+1), nabla^(p+2) R
/// are normalized too.
Frame normalize_frame(const FamilyParams& params, std::span<const double> point, bool rescale = true);

/// Gram matrix of the frame vectors under the metric at `point`.
Eigen::MatrixXd frame_gram(const FamilyParams& params, std::span<const double> point, const Frame& frame);

/// Components of a coordinate tensor in the basis given by the columns of `basis`.
SparseTensor change_basis(const SparseTensor& t, const Eigen::MatrixXd& basis, double drop_below = 0.0);

struct CurvatureModel {
  int dimension = 0;
  std::optional<Eigen::MatrixXd> inner_product;
  std::vector<SparseTensor> tensors;  // A^0, A^1, ...
};

/// The model with inner product and tensors A^0 .. A^k in the frame ordering.
CurvatureModel family_model(int p, int k);
/// The three-dimensional affine model with B(X, Y, Z, X) = 1.
CurvatureModel quotient_model();

/// {xi : A^0(eta1, eta2, eta3, xi) = 0 for all eta}, as orthonormal columns.
Eigen::MatrixXd model_kernel(const CurvatureModel& model, double rank_tolerance = 1e-12);

struct ModelAgreement {
  std::vector<double> max_deviation;  // per level k
  double gram_deviation = 0.0;
};

/// Compares nabla^0 .. nabla^k R in the frame basis and the frame Gram matrix
/// with the model.
ModelAgreement compare_with_model(const FamilyParams& params, std::span<const double> point, const Frame& frame,
                                  int k);

// ---------------------------------------------------------------------------
// Constancy of alpha on a grid

struct AlphaRow {
  double y = 0.0;
  double alpha = 0.0;
  double alpha_jacobi = 0.0;
  double alpha_prime = 0.0;
};

struct ConstancyReport {
  std::vector<AlphaRow> rows;
  double variance = 0.0;
  double spread = 0.0;  // max - min
  bool constant = false;
  int alpha_prime_sign_changes = 0;
};

/// Samples alpha on [lo, hi] with n points. The Jacobi route runs at a point
/// with the given y and all other coordinates 0, with fixed X, Y and h.
ConstancyReport alpha_constancy(const FamilyParams& params, double lo, double hi, int n, bool with_jacobi = true,
                                double variance_threshold = 1e-20);

}  // namespace kcurv
