#pragma once

// Arithmetic expressions for metric coefficients, F^2 fields, one-forms and
// wind components. Variables are x1..xn (chart) and v1..vn (fiber). The
// grammar, tightest first: `^` (integer literal exponents, right
// associative), unary minus, `*` `/`, `+` `-`. Calls: sqrt, exp, log, sin,
// cos, abs. Evaluation is generic over the numeric semantics (double or Jet)
// so derivatives flow through parsed definitions.

#include "finsler/common.hpp"
#include "finsler/jet.hpp"

#include <cctype>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace finsler {

enum class ExprKind { constant, variable, neg, add, sub, mul, div, pow, call };
enum class CallFn { sqrt, exp, log, sin, cos, abs };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprKind kind;
  double constant = 0.0;
  int variable = -1;      // 0..n-1 -> x_i, n..2n-1 -> v_{i-n}
  long long exponent = 0; // pow only
  CallFn fn = CallFn::sqrt;
  ExprPtr a, b;
  int pos = 0;            // 1-based source position, for diagnostics
};

// A parsed expression together with the dimension it was parsed against.
struct ExprAst {
  ExprPtr root;
  int dimension = 0;
};

namespace detail {

class Parser {
 public:
  Parser(const std::string& text, int dim) : s_(text), dim_(dim) {}

  ExprPtr parse() {
    if (trimmed_empty()) throw ParseError("empty expression", 1);
    ExprPtr e = expr();
    skip_ws();
    if (i_ < s_.size()) throw ParseError("unexpected character '" + std::string(1, s_[i_]) + "'", pos());
    return e;
  }

 private:
  const std::string& s_;
  int dim_;
  size_t i_ = 0;

  bool trimmed_empty() {
    for (char c : s_)
      if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
  }
  int pos() const { return static_cast<int>(i_) + 1; }
  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  bool peek(char c) {
    skip_ws();
    return i_ < s_.size() && s_[i_] == c;
  }
  bool accept(char c) {
    if (peek(c)) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect(char c, const char* what) {
    if (!accept(c)) throw ParseError(std::string("expected ") + what, pos());
  }

  ExprPtr make(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

  ExprPtr expr() {
    ExprPtr left = term();
    for (;;) {
      if (accept('+')) {
        ExprPtr right = term();
        left = make({ExprKind::add, 0, -1, 0, CallFn::sqrt, left, right, pos()});
      } else if (accept('-')) {
        ExprPtr right = term();
        left = make({ExprKind::sub, 0, -1, 0, CallFn::sqrt, left, right, pos()});
      } else {
        return left;
      }
    }
  }

  ExprPtr term() {
    ExprPtr left = unary();
    for (;;) {
      if (accept('*')) {
        ExprPtr right = unary();
        left = make({ExprKind::mul, 0, -1, 0, CallFn::sqrt, left, right, pos()});
      } else if (accept('/')) {
        ExprPtr right = unary();
        left = make({ExprKind::div, 0, -1, 0, CallFn::sqrt, left, right, pos()});
      } else {
        return left;
      }
    }
  }

  ExprPtr unary() {
    if (accept('-')) {
      ExprPtr inner = unary();
      return make({ExprKind::neg, 0, -1, 0, CallFn::sqrt, inner, nullptr, pos()});
    }
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    skip_ws();
    if (accept('^')) {
      long long e = exponent_literal();
      return make({ExprKind::pow, 0, -1, e, CallFn::sqrt, base, nullptr, pos()});
    }
    return base;
  }

  // Exponents must be integer literals (optionally signed); chains fold
  // right-associatively at parse time: a^2^3 == a^(2^3).
  long long exponent_literal() {
    skip_ws();
    bool negate = false;
    if (accept('-')) negate = true;
    skip_ws();
    int at = pos();
    if (i_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[i_])))
      throw ParseError("exponent must be an integer literal", at);
    long long v = 0;
    size_t start = i_;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
      v = v * 10 + (s_[i_] - '0');
      if (v > 1000000) throw ParseError("exponent literal too large", at);
      ++i_;
    }
    if (i_ < s_.size() && (s_[i_] == '.' || s_[i_] == 'e' || s_[i_] == 'E'))
      throw ParseError("exponent must be an integer literal", static_cast<int>(start) + 1);
    if (accept('^')) {
      long long inner = exponent_literal();
      if (inner < 0) throw ParseError("negative exponent in exponent chain", at);
      long long r = 1;
      for (long long k = 0; k < inner; ++k) {
        r *= v;
        if (std::abs(r) > 1000000) throw ParseError("exponent chain overflows", at);
      }
      v = r;
    }
    if (std::abs(v) > 64) throw ParseError("exponent magnitude above 64", at);
    return negate ? -v : v;
  }

  ExprPtr primary() {
    skip_ws();
    int at = pos();
    if (i_ >= s_.size()) throw ParseError("unexpected end of expression", at);
    char c = s_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    if (accept('(')) {
      ExprPtr inner = expr();
      expect(')', "')'");
      return inner;
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", at);
  }

  ExprPtr number() {
    int at = pos();
    size_t start = i_;
    while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.')) ++i_;
    if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
      size_t save = i_;
      ++i_;
      if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) ++i_;
      if (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
      } else {
        i_ = save;
      }
    }
    double v = 0;
    try {
      v = std::stod(s_.substr(start, i_ - start));
    } catch (const std::exception&) {
      throw ParseError("malformed number literal", at);
    }
    return make({ExprKind::constant, v, -1, 0, CallFn::sqrt, nullptr, nullptr, at});
  }

  ExprPtr identifier() {
    int at = pos();
    size_t start = i_;
    while (i_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
      ++i_;
    std::string name = s_.substr(start, i_ - start);
    if (name == "sqrt" || name == "exp" || name == "log" || name == "sin" ||
        name == "cos" || name == "abs") {
      expect('(', "'(' after function name");
      ExprPtr arg = expr();
      expect(')', "')'");
      CallFn fn = name == "sqrt"  ? CallFn::sqrt
                  : name == "exp" ? CallFn::exp
                  : name == "log" ? CallFn::log
                  : name == "sin" ? CallFn::sin
                  : name == "cos" ? CallFn::cos
                                  : CallFn::abs;
      return make({ExprKind::call, 0, -1, 0, fn, arg, nullptr, at});
    }
    if ((name[0] == 'x' || name[0] == 'v') && name.size() > 1) {
      bool digits = true;
      for (size_t k = 1; k < name.size(); ++k)
        if (!std::isdigit(static_cast<unsigned char>(name[k]))) digits = false;
      if (digits) {
        int idx = std::stoi(name.substr(1));
        if (idx < 1 || idx > dim_)
          throw ParseError("variable '" + name + "' out of range for dimension " +
                               std::to_string(dim_),
                           at);
        int var = (name[0] == 'x') ? idx - 1 : dim_ + idx - 1;
        return make({ExprKind::variable, 0, var, 0, CallFn::sqrt, nullptr, nullptr, at});
      }
    }
    throw ParseError("unknown identifier '" + name + "'", at);
  }
};

}  // namespace detail

inline ExprAst parse(const std::string& text, int dimension) {
  if (dimension < 1 || dimension > 4)
    throw ParseError("dimension must be between 1 and 4", 1);
  detail::Parser p(text, dimension);
  return ExprAst{p.parse(), dimension};
}

// Bindings for the 2n variables in one numeric semantics.
template <class T>
struct EvalScope {
  int dimension = 0;
  std::vector<T> x;
  std::vector<T> v;
};

namespace detail {

inline const char* fn_name(CallFn f) {
  switch (f) {
    case CallFn::sqrt: return "sqrt";
    case CallFn::exp: return "exp";
    case CallFn::log: return "log";
    case CallFn::sin: return "sin";
    case CallFn::cos: return "cos";
    default: return "abs";
  }
}

inline double apply_fn(CallFn f, double a, int pos) {
  switch (f) {
    case CallFn::sqrt:
      if (a < 0.0) throw DomainError("sqrt of negative value at offset " + std::to_string(pos));
      return std::sqrt(a);
    case CallFn::exp:
      return std::exp(a);
    case CallFn::log:
      if (a <= 0.0) throw DomainError("log of non-positive value at offset " + std::to_string(pos));
      return std::log(a);
    case CallFn::sin:
      return std::sin(a);
    case CallFn::cos:
      return std::cos(a);
    default:
      return std::abs(a);
  }
}

inline Jet apply_fn(CallFn f, const Jet& a, int pos) {
  try {
    switch (f) {
      case CallFn::sqrt: return sqrt(a);
      case CallFn::exp: return exp(a);
      case CallFn::log: return log(a);
      case CallFn::sin: return sin(a);
      case CallFn::cos: return cos(a);
      default: return abs(a);
    }
  } catch (const DomainError& e) {
    throw DomainError(std::string(e.what()) + " at offset " + std::to_string(pos));
  }
}

inline double pow_value(double base, long long e, int pos) {
  if (e < 0 && base == 0.0)
    throw DomainError("zero raised to negative exponent at offset " + std::to_string(pos));
  return std::pow(base, static_cast<double>(e));
}

inline Jet pow_value(const Jet& base, long long e, int pos) {
  try {
    return pow_int(base, e);
  } catch (const DomainError& err) {
    throw DomainError(std::string(err.what()) + " at offset " + std::to_string(pos));
  }
}

inline double make_const(double v, const EvalScope<double>&) { return v; }
inline Jet make_const(double v, const EvalScope<Jet>& s) {
  const Jet& probe = s.x.empty() ? s.v.front() : s.x.front();
  return Jet::constant(v, probe.table_ptr());
}

inline bool is_zero(double v) { return v == 0.0; }
inline bool is_zero(const Jet& v) { return v.value() == 0.0; }

}  // namespace detail

template <class T>
T evaluate(const ExprAst& ast, const EvalScope<T>& scope) {
  if (scope.dimension != ast.dimension)
    throw NumericalError("scope dimension does not match expression dimension");
  if (static_cast<int>(scope.x.size()) != ast.dimension ||
      static_cast<int>(scope.v.size()) != ast.dimension)
    throw NumericalError("scope must bind all 2n variables");
  struct Rec {
    const EvalScope<T>& s;
    int n;
    T eval(const ExprNode& e) {
      switch (e.kind) {
        case ExprKind::constant:
          return detail::make_const(e.constant, s);
        case ExprKind::variable:
          return e.variable < n ? s.x[static_cast<size_t>(e.variable)]
                                : s.v[static_cast<size_t>(e.variable - n)];
        case ExprKind::neg:
          return -eval(*e.a);
        case ExprKind::add:
          return eval(*e.a) + eval(*e.b);
        case ExprKind::sub:
          return eval(*e.a) - eval(*e.b);
        case ExprKind::mul:
          return eval(*e.a) * eval(*e.b);
        case ExprKind::div: {
          T num = eval(*e.a);
          T den = eval(*e.b);
          if (detail::is_zero(den))
            throw DomainError("division by zero at offset " + std::to_string(e.pos));
          return num / den;
        }
        case ExprKind::pow:
          return detail::pow_value(eval(*e.a), e.exponent, e.pos);
        default:
          return detail::apply_fn(e.fn, eval(*e.a), e.pos);
      }
    }
  };
  Rec r{scope, ast.dimension};
  return r.eval(*ast.root);
}

// Fully parenthesized rendering; parse(print(parse(s))) is structurally
// equal to parse(s).
inline std::string print(const ExprAst& ast) {
  struct Rec {
    int n;
    std::string go(const ExprNode& e) {
      std::ostringstream os;
      switch (e.kind) {
        case ExprKind::constant: {
          os.precision(17);
          os << e.constant;
          return os.str();
        }
        case ExprKind::variable:
          return (e.variable < n ? "x" + std::to_string(e.variable + 1)
                                 : "v" + std::to_string(e.variable - n + 1));
        case ExprKind::neg: return "(-" + go(*e.a) + ")";
        case ExprKind::add: return "(" + go(*e.a) + "+" + go(*e.b) + ")";
        case ExprKind::sub: return "(" + go(*e.a) + "-" + go(*e.b) + ")";
        case ExprKind::mul: return "(" + go(*e.a) + "*" + go(*e.b) + ")";
        case ExprKind::div: return "(" + go(*e.a) + "/" + go(*e.b) + ")";
        case ExprKind::pow: return "(" + go(*e.a) + "^" + std::to_string(e.exponent) + ")";
        default: return std::string(detail::fn_name(e.fn)) + "(" + go(*e.a) + ")";
      }
    }
  };
  Rec r{ast.dimension};
  return r.go(*ast.root);
}

inline bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::constant: return a->constant == b->constant;
    case ExprKind::variable: return a->variable == b->variable;
    case ExprKind::pow:
      return a->exponent == b->exponent && structurally_equal(a->a, b->a);
    case ExprKind::call:
      return a->fn == b->fn && structurally_equal(a->a, b->a);
    case ExprKind::neg:
      return structurally_equal(a->a, b->a);
    default:
      return structurally_equal(a->a, b->a) && structurally_equal(a->b, b->b);
  }
}

}  // namespace finsler
