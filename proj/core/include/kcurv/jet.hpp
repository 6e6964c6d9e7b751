#pragma once

// Truncated multivariate Taylor polynomials ("jets").
//
// A jet over n variables truncated at order K stores the Taylor coefficients
// c_m = (d^m f)(base) / m! for every multi-index m with |m| <= K. Coefficients
// are laid out in graded lexicographic order, so the table of an order-K' jet
// is a prefix of the table of any order-K jet with K >= K'. Truncation is a
// resize and mixed-order arithmetic can read operands in place.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kcurv {

/// Shared, immutable indexing tables for jets with a given variable count and
/// order. Obtain instances through JetLayout::get, which caches them.
class JetLayout {
 public:
  struct Term {
    std::uint32_t lhs;
    std::uint32_t rhs;
  };

  static constexpr int kMaxVariables = 12;
  static constexpr int kMaxOrder = 31;

  static std::shared_ptr<const JetLayout> get(int nvars, int order);

  int nvars() const noexcept { return nvars_; }
  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return degrees_.size(); }

  /// Number of multi-indices of degree < d, i.e. the table size at order d-1.
  std::size_t degree_begin(int d) const;

  int degree(std::size_t rank) const noexcept { return degrees_[rank]; }
  std::span<const std::uint8_t> multi_index(std::size_t rank) const noexcept {
    return {indices_.data() + rank * static_cast<std::size_t>(nvars_),
            static_cast<std::size_t>(nvars_)};
  }
  /// Rank of a multi-index; throws SpecError if its degree exceeds the order.
  std::size_t rank(std::span<const int> m) const;
  /// m! for the multi-index at `rank`.
  double factorial(std::size_t rank) const noexcept { return factorials_[rank]; }

  /// Pairs (i, j) with index(i) + index(j) == index(k).
  std::span<const Term> product_terms(std::size_t k) const noexcept {
    return {terms_.data() + term_begin_[k], term_begin_[k + 1] - term_begin_[k]};
  }

  /// For each rank r below degree_begin(order), the rank of index(r) + e_var.
  std::span<const std::uint32_t> raised(int var) const noexcept {
    return {raised_.data() + static_cast<std::size_t>(var) * raised_stride_, raised_stride_};
  }

 private:
  JetLayout(int nvars, int order);

  int nvars_;
  int order_;
  std::vector<std::uint8_t> indices_;
  std::vector<int> degrees_;
  std::vector<double> factorials_;
  std::vector<Term> terms_;
  std::vector<std::size_t> term_begin_;
  std::vector<std::uint32_t> raised_;
  std::size_t raised_stride_ = 0;
};

using VariableList = std::shared_ptr<const std::vector<std::string>>;

VariableList make_variable_list(std::vector<std::string> names);

class Jet {
 public:
  /// Empty jet over zero variables at order 0 with value 0.
  Jet();
  /// Zero jet.
  Jet(VariableList vars, int order);

  static Jet constant(VariableList vars, int order, double value);
  /// The coordinate function of variable `var`, expanded around `base`.
  static Jet variable(VariableList vars, int order, std::size_t var, double base);

  int order() const noexcept { return layout_->order(); }
  std::size_t nvars() const noexcept { return static_cast<std::size_t>(layout_->nvars()); }
  const std::vector<std::string>& variables() const noexcept { return *vars_; }
  const VariableList& variable_list() const noexcept { return vars_; }
  const JetLayout& layout() const noexcept { return *layout_; }

  std::span<const double> coefficients() const noexcept { return coeffs_; }
  std::span<double> coefficients() noexcept { return coeffs_; }
  double coefficient(std::span<const int> m) const;
  double value() const noexcept { return coeffs_[0]; }

  /// The partial derivative d^m at the base point, i.e. m! * coefficient(m).
  double partial(std::span<const int> m) const;

  bool is_zero() const noexcept;

  /// Copy with every coefficient above `order` dropped; `order` <= this->order().
  Jet truncated(int order) const;

  /// d/d(var), one order lower. Requires order() >= 1.
  Jet derivative(std::size_t var) const;

  /// *this += scale * a * b, truncated at this->order(). Operands may carry a
  /// higher order; only their prefixes are read.
  void add_product(const Jet& a, const Jet& b, double scale = 1.0);
  /// *this += scale * a, reading the prefix of `a`.
  void add_scaled(const Jet& a, double scale = 1.0);

  Jet& operator+=(const Jet& other);
  Jet& operator-=(const Jet& other);
  Jet& operator*=(double s) noexcept;
  Jet& operator+=(double s) noexcept {
    coeffs_[0] += s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) { return a *= -1.0; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator*(const Jet& a, const Jet& b);

 private:
  void require_compatible(const Jet& other, bool same_order) const;

  VariableList vars_;
  std::shared_ptr<const JetLayout> layout_;
  std::vector<double> coeffs_;
};

/// Truncated product at an explicit order not above either operand's.
Jet multiply(const Jet& a, const Jet& b, int order);

Jet exp(const Jet& a);
Jet sin(const Jet& a);
Jet cos(const Jet& a);
Jet pow(const Jet& a, unsigned exponent);

}  // namespace kcurv
