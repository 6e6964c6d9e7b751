#include "kcurv/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <system_error>

namespace kcurv {

struct Expr::Node {
  explicit Node(Kind k) : kind(k) {}

  Kind kind;
  double value = 0.0;
  std::string name;
  std::size_t index = 0;
  unsigned exponent = 0;
  std::vector<Expr> children;
};

Expr::Expr() : Expr(std::make_shared<const Node>(Node{Kind::Constant})) {}

Expr Expr::constant(double value) {
  if (!std::isfinite(value)) throw SpecError("non-finite constant in expression");
  if (value < 0) return negate(constant(-value));
  Node n{Kind::Constant};
  n.value = value == 0.0 ? 0.0 : value;  // drop the sign of -0
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::variable(std::string name, std::size_t index) {
  Node n{Kind::Variable};
  n.name = std::move(name);
  n.index = index;
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::sum(std::vector<Expr> terms) {
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return std::move(terms.front());
  Node n{Kind::Sum};
  n.children = std::move(terms);
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::product(std::vector<Expr> factors) {
  if (factors.empty()) return constant(1.0);
  if (factors.size() == 1) return std::move(factors.front());
  Node n{Kind::Product};
  n.children = std::move(factors);
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::power(Expr base, unsigned exponent) {
  Node n{Kind::Power};
  n.exponent = exponent;
  n.children = {std::move(base)};
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::exp(Expr arg) {
  Node n{Kind::Exp};
  n.children = {std::move(arg)};
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::sin(Expr arg) {
  Node n{Kind::Sin};
  n.children = {std::move(arg)};
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::cos(Expr arg) {
  Node n{Kind::Cos};
  n.children = {std::move(arg)};
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::negate(Expr arg) {
  Node n{Kind::Negate};
  n.children = {std::move(arg)};
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr::Kind Expr::kind() const noexcept { return node_->kind; }

double Expr::value() const {
  if (node_->kind != Kind::Constant) throw SpecError("value() on a non-constant expression");
  return node_->value;
}

const std::string& Expr::name() const {
  if (node_->kind != Kind::Variable) throw SpecError("name() on a non-variable expression");
  return node_->name;
}

std::size_t Expr::index() const {
  if (node_->kind != Kind::Variable) throw SpecError("index() on a non-variable expression");
  return node_->index;
}

unsigned Expr::exponent() const {
  if (node_->kind != Kind::Power) throw SpecError("exponent() on a non-power expression");
  return node_->exponent;
}

std::span<const Expr> Expr::children() const noexcept { return node_->children; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case Expr::Kind::Constant:
      return x.value == y.value;
    case Expr::Kind::Variable:
      return x.name == y.name && x.index == y.index;
    case Expr::Kind::Power:
      if (x.exponent != y.exponent) return false;
      break;
    default:
      break;
  }
  return x.children == y.children;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { Number, Ident, Plus, Minus, Star, Caret, LParen, RParen, End };

struct Token {
  Tok kind;
  std::size_t offset;
  std::string_view text;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= text_.size()) return {Tok::End, start, {}};
    const char c = text_[pos_];
    auto single = [&](Tok k) {
      ++pos_;
      return Token{k, start, text_.substr(start, 1)};
    };
    switch (c) {
      case '+': return single(Tok::Plus);
      case '-': return single(Tok::Minus);
      case '*': return single(Tok::Star);
      case '^': return single(Tok::Caret);
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '.') {
        ++pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
      if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
        std::size_t look = pos_ + 1;
        if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
        if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
          pos_ = look;
          while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
      }
      return {Tok::Number, start, text_.substr(start, pos_ - start)};
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      return {Tok::Ident, start, text_.substr(start, pos_ - start)};
    }
    throw ParseError(std::string("unexpected character '") + c + "'", start);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> chart) : lexer_(text), chart_(chart) {
    advance();
  }

  Expr parse_all() {
    Expr e = expr();
    if (current_.kind != Tok::End) unexpected();
    return e;
  }

 private:
  void advance() { current_ = lexer_.next(); }

  [[noreturn]] void unexpected() const {
    if (current_.kind == Tok::End) throw ParseError("unexpected end of input", current_.offset);
    throw ParseError("unexpected '" + std::string(current_.text) + "'", current_.offset);
  }

  void expect(Tok kind, const char* what) {
    if (current_.kind != kind) {
      if (current_.kind == Tok::End) throw ParseError(std::string("expected ") + what, current_.offset);
      throw ParseError(std::string("expected ") + what + ", found '" + std::string(current_.text) + "'",
                       current_.offset);
    }
    advance();
  }

  Expr expr() {
    std::vector<Expr> terms;
    terms.push_back(term());
    while (current_.kind == Tok::Plus || current_.kind == Tok::Minus) {
      const bool minus = current_.kind == Tok::Minus;
      advance();
      Expr t = term();
      terms.push_back(minus ? Expr::negate(std::move(t)) : std::move(t));
    }
    return Expr::sum(std::move(terms));
  }

  Expr term() {
    std::vector<Expr> factors;
    factors.push_back(factor());
    while (current_.kind == Tok::Star) {
      advance();
      factors.push_back(factor());
    }
    return Expr::product(std::move(factors));
  }

  Expr factor() {
    if (current_.kind == Tok::Minus) {
      advance();
      return Expr::negate(factor());
    }
    Expr base = atom();
    if (current_.kind != Tok::Caret) return base;
    advance();
    if (current_.kind != Tok::Number) {
      throw ParseError("exponent must be a non-negative integer literal", current_.offset);
    }
    unsigned exponent = 0;
    const auto text = current_.text;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), exponent);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ParseError("exponent must be a non-negative integer literal", current_.offset);
    }
    advance();
    return Expr::power(std::move(base), exponent);
  }

  Expr atom() {
    switch (current_.kind) {
      case Tok::Number: {
        double v = 0.0;
        const auto text = current_.text;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
          throw ParseError("malformed number '" + std::string(text) + "'", current_.offset);
        }
        advance();
        return Expr::constant(v);
      }
      case Tok::Ident: {
        const Token tok = current_;
        advance();
        if (tok.text == "exp" || tok.text == "sin" || tok.text == "cos") {
          expect(Tok::LParen, "'(' after function name");
          Expr arg = expr();
          expect(Tok::RParen, "')'");
          if (tok.text == "exp") return Expr::exp(std::move(arg));
          if (tok.text == "sin") return Expr::sin(std::move(arg));
          return Expr::cos(std::move(arg));
        }
        for (std::size_t i = 0; i < chart_.size(); ++i) {
          if (chart_[i] == tok.text) return Expr::variable(chart_[i], i);
        }
        throw ParseError("unknown identifier '" + std::string(tok.text) + "'", tok.offset);
      }
      case Tok::LParen: {
        advance();
        Expr inner = expr();
        expect(Tok::RParen, "')'");
        return inner;
      }
      default:
        unexpected();
    }
  }

  Lexer lexer_;
  std::span<const std::string> chart_;
  Token current_{Tok::End, 0, {}};
};

}  // namespace

Expr parse(std::string_view text, std::span<const std::string> chart) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ParseError("empty expression", 0);
  }
  return Parser(text, chart).parse_all();
}

// ---------------------------------------------------------------------------
// Printer

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string print(const Expr& e);

bool is_atom(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
    case Expr::Kind::Variable:
    case Expr::Kind::Exp:
    case Expr::Kind::Sin:
    case Expr::Kind::Cos:
      return true;
    default:
      return false;
  }
}

std::string parens(const std::string& s) { return "(" + s + ")"; }

// Operand of a unary minus or a product: sums and products need parentheses.
std::string print_factor(const Expr& e) {
  if (e.kind() == Expr::Kind::Sum || e.kind() == Expr::Kind::Product) return parens(print(e));
  return print(e);
}

// Operand of '+' / '-': only nested sums need parentheses.
std::string print_term(const Expr& e) {
  if (e.kind() == Expr::Kind::Sum) return parens(print(e));
  return print(e);
}

std::string print(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return format_number(e.value());
    case Expr::Kind::Variable:
      return e.name();
    case Expr::Kind::Sum: {
      std::string out;
      bool first = true;
      for (const auto& c : e.children()) {
        if (first) {
          out = print_term(c);
          first = false;
        } else if (c.kind() == Expr::Kind::Negate) {
          out += " - " + print_term(c.children()[0]);
        } else {
          out += " + " + print_term(c);
        }
      }
      return out;
    }
    case Expr::Kind::Product: {
      std::string out;
      for (const auto& c : e.children()) {
        if (!out.empty()) out += "*";
        out += print_factor(c);
      }
      return out;
    }
    case Expr::Kind::Power: {
      const auto& base = e.children()[0];
      return (is_atom(base) ? print(base) : parens(print(base))) + "^" + std::to_string(e.exponent());
    }
    case Expr::Kind::Exp:
      return "exp(" + print(e.children()[0]) + ")";
    case Expr::Kind::Sin:
      return "sin(" + print(e.children()[0]) + ")";
    case Expr::Kind::Cos:
      return "cos(" + print(e.children()[0]) + ")";
    case Expr::Kind::Negate:
      return "-" + print_factor(e.children()[0]);
  }
  return {};
}

void collect(const Expr& e, std::set<std::pair<std::size_t, std::string>>& out) {
  if (e.kind() == Expr::Kind::Variable) {
    out.emplace(e.index(), e.name());
    return;
  }
  for (const auto& c : e.children()) collect(c, out);
}

}  // namespace

std::string to_string(const Expr& e) { return print(e); }

std::set<std::string> free_vars(const Expr& e) {
  std::set<std::pair<std::size_t, std::string>> vars;
  collect(e, vars);
  std::set<std::string> names;
  for (auto& [i, n] : vars) names.insert(n);
  return names;
}

std::vector<std::size_t> free_var_indices(const Expr& e) {
  std::set<std::pair<std::size_t, std::string>> vars;
  collect(e, vars);
  std::vector<std::size_t> out;
  for (auto& [i, n] : vars) out.push_back(i);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Jet evaluation

JetChart make_jet_chart(std::span<const std::string> chart, std::span<const std::string> active) {
  JetChart jc;
  std::vector<std::string> names;
  for (const auto& a : active) {
    auto it = std::find(chart.begin(), chart.end(), a);
    if (it == chart.end()) throw SpecError("active variable '" + a + "' is not a chart coordinate");
    jc.chart_indices.push_back(static_cast<std::size_t>(it - chart.begin()));
    names.push_back(a);
  }
  jc.names = make_variable_list(std::move(names));
  return jc;
}

JetChart make_jet_chart(std::span<const std::string> chart, std::span<const std::size_t> active) {
  JetChart jc;
  std::vector<std::string> names;
  for (auto i : active) {
    if (i >= chart.size()) throw SpecError("active variable index out of range");
    jc.chart_indices.push_back(i);
    names.push_back(chart[i]);
  }
  jc.names = make_variable_list(std::move(names));
  return jc;
}

namespace {

class JetEvaluator {
 public:
  JetEvaluator(std::span<const double> base, const JetChart& chart, int order)
      : base_(base), chart_(chart), order_(order) {
    for (std::size_t k = 0; k < chart.chart_indices.size(); ++k) {
      const auto idx = chart.chart_indices[k];
      if (idx >= slot_.size()) slot_.resize(idx + 1, -1);
      slot_[idx] = static_cast<int>(k);
    }
  }

  Jet eval(const Expr& e) const {
    switch (e.kind()) {
      case Expr::Kind::Constant:
        return Jet::constant(chart_.names, order_, e.value());
      case Expr::Kind::Variable: {
        const auto idx = e.index();
        if (idx >= base_.size()) throw SpecError("variable '" + e.name() + "' outside the base point");
        if (idx < slot_.size() && slot_[idx] >= 0) {
          return Jet::variable(chart_.names, order_, static_cast<std::size_t>(slot_[idx]), base_[idx]);
        }
        return Jet::constant(chart_.names, order_, base_[idx]);
      }
      case Expr::Kind::Sum: {
        Jet s(chart_.names, order_);
        for (const auto& c : e.children()) s += eval(c);
        return s;
      }
      case Expr::Kind::Product: {
        auto children = e.children();
        Jet p = eval(children[0]);
        for (std::size_t i = 1; i < children.size(); ++i) p = p * eval(children[i]);
        return p;
      }
      case Expr::Kind::Power:
        return pow(eval(e.children()[0]), e.exponent());
      case Expr::Kind::Exp:
        return exp(eval(e.children()[0]));
      case Expr::Kind::Sin:
        return sin(eval(e.children()[0]));
      case Expr::Kind::Cos:
        return cos(eval(e.children()[0]));
      case Expr::Kind::Negate:
        return -eval(e.children()[0]);
    }
    return Jet(chart_.names, order_);
  }

 private:
  std::span<const double> base_;
  const JetChart& chart_;
  int order_;
  std::vector<int> slot_;
};

}  // namespace

Jet eval_jet(const Expr& e, std::span<const double> base, const JetChart& active, int order) {
  if (order < 0) throw SpecError("negative jet order");
  Jet j = JetEvaluator(base, active, order).eval(e);
  for (double c : j.coefficients()) {
    if (!std::isfinite(c)) throw NumericError("expression '" + to_string(e) + "' is not finite at the base point");
  }
  return j;
}

}  // namespace kcurv
