#pragma once

// Symbolic expressions for metric components and profile functions.
//
// Grammar:
//   expr   := term (('+' | '-') term)*
//   term   := factor ('*' factor)*
//   factor := atom ('^' uint)? | '-' factor
//   atom   := number | ident | ('exp' | 'sin' | 'cos') '(' expr ')' | '(' expr ')'
//
// There is no division and exponents are non-negative integers, so every
// expression is an entire function of its variables.

#include <cmath>
#include <cstddef>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kcurv/error.hpp"
#include "kcurv/jet.hpp"

namespace kcurv {

class Expr {
 public:
  enum class Kind { Constant, Variable, Sum, Product, Power, Exp, Sin, Cos, Negate };

  /// The constant 0.
  Expr();

  /// Non-negative literal; a negative value is stored as Negate(Constant).
  static Expr constant(double value);
  static Expr variable(std::string name, std::size_t index);
  static Expr sum(std::vector<Expr> terms);
  static Expr product(std::vector<Expr> factors);
  static Expr power(Expr base, unsigned exponent);
  static Expr exp(Expr arg);
  static Expr sin(Expr arg);
  static Expr cos(Expr arg);
  static Expr negate(Expr arg);

  Kind kind() const noexcept;
  double value() const;                     // Constant
  const std::string& name() const;          // Variable
  std::size_t index() const;                // Variable: position in the chart
  unsigned exponent() const;                // Power
  std::span<const Expr> children() const noexcept;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Parses `text` against the coordinate names of a chart.
Expr parse(std::string_view text, std::span<const std::string> chart);

/// Canonical text form; parse(to_string(e), chart) == e.
std::string to_string(const Expr& e);

std::set<std::string> free_vars(const Expr& e);
/// Chart positions of the free variables, ascending.
std::vector<std::size_t> free_var_indices(const Expr& e);

/// Plain evaluation at a chart point. Templated so that test oracles can run
/// in extended precision.
template <typename T>
T evaluate(const Expr& e, std::span<const T> point);

/// Which chart coordinates are live jet variables, and their names.
struct JetChart {
  VariableList names;
  std::vector<std::size_t> chart_indices;
};

JetChart make_jet_chart(std::span<const std::string> chart, std::span<const std::string> active);
JetChart make_jet_chart(std::span<const std::string> chart, std::span<const std::size_t> active);

/// Taylor expansion of `e` around `base` in the active variables; inactive
/// coordinates are frozen at their base values.
Jet eval_jet(const Expr& e, std::span<const double> base, const JetChart& active, int order);

// ---------------------------------------------------------------------------

template <typename T>
T evaluate(const Expr& e, std::span<const T> point) {
  using std::cos;
  using std::exp;
  using std::sin;
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return static_cast<T>(e.value());
    case Expr::Kind::Variable:
      if (e.index() >= point.size()) throw SpecError("variable '" + e.name() + "' outside the evaluation point");
      return point[e.index()];
    case Expr::Kind::Sum: {
      T s = 0;
      for (const auto& c : e.children()) s += evaluate<T>(c, point);
      return s;
    }
    case Expr::Kind::Product: {
      T p = 1;
      for (const auto& c : e.children()) p *= evaluate<T>(c, point);
      return p;
    }
    case Expr::Kind::Power: {
      const T b = evaluate<T>(e.children()[0], point);
      T r = 1;
      for (unsigned i = 0; i < e.exponent(); ++i) r *= b;
      return r;
    }
    case Expr::Kind::Exp:
      return exp(evaluate<T>(e.children()[0], point));
    case Expr::Kind::Sin:
      return sin(evaluate<T>(e.children()[0], point));
    case Expr::Kind::Cos:
      return cos(evaluate<T>(e.children()[0], point));
    case Expr::Kind::Negate:
      return -evaluate<T>(e.children()[0], point);
  }
  return T{};
}

}  // namespace kcurv
