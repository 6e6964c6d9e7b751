#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcurv/expr.hpp"

namespace kcurv {

/// Counts of negative and positive eigenvalues. Riemannian metrics are
/// (0, m); the balanced case has negative == positive.
struct Signature {
  int negative = 0;
  int positive = 0;

  friend bool operator==(const Signature&, const Signature&) = default;
};

/// A pseudo-Riemannian metric on a single chart, given by symbolic components.
class MetricSpec {
 public:
  /// All components start at 0; set_component fills both (i, j) and (j, i).
  MetricSpec(std::vector<std::string> coordinates, Signature signature);

  std::size_t dimension() const noexcept { return coordinates_.size(); }
  const std::vector<std::string>& coordinates() const noexcept { return coordinates_; }
  Signature signature() const noexcept { return signature_; }
  std::optional<std::size_t> coordinate_index(std::string_view name) const;

  void set_component(std::size_t i, std::size_t j, Expr value);
  void set_component(std::size_t i, std::size_t j, std::string_view text);
  const Expr& component(std::size_t i, std::size_t j) const { return components_[i * dimension() + j]; }

  /// Chart coordinates on which at least one component depends, ascending.
  const std::vector<std::size_t>& dependency_indices() const noexcept { return dependencies_; }

  Eigen::MatrixXd evaluate(std::span<const double> point) const;

  /// Throws NumericError when the metric is singular at `point` and
  /// SpecError when the eigenvalue signs disagree with the declared signature.
  void validate_at(std::span<const double> point) const;

  /// {dim, coords, signature: [neg, pos], components: [{i, j, expr}]}
  static MetricSpec from_json(std::string_view json_text);
  static MetricSpec load(const std::string& path);
  std::string to_json() const;

 private:
  void refresh_dependencies();

  std::vector<std::string> coordinates_;
  Signature signature_;
  std::vector<Expr> components_;
  std::vector<std::size_t> dependencies_;
};

/// Eigenvalue sign counts of a symmetric matrix; |lambda| <= tol counts as zero
/// and is reported through `zero`.
struct InertiaCount {
  int negative = 0;
  int positive = 0;
  int zero = 0;
};
InertiaCount inertia(const Eigen::MatrixXd& symmetric, double tol = 1e-12);

}  // namespace kcurv
