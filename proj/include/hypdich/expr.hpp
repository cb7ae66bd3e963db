#pragma once

// Coefficient expression language: parse, print, evaluate.
//
// Grammar (lowest to highest binding):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | ident | func '(' sum ')' | '(' sum ')'

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace hypdich::expr {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : std::runtime_error("parse error at byte " + std::to_string(offset) + ": " + message),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BinaryOp { add, sub, mul, div, pow };
enum class Func { sin, cos, exp, sqrt, tanh, abs };

inline std::optional<Func> func_from_name(std::string_view name) {
  if (name == "sin") return Func::sin;
  if (name == "cos") return Func::cos;
  if (name == "exp") return Func::exp;
  if (name == "sqrt") return Func::sqrt;
  if (name == "tanh") return Func::tanh;
  if (name == "abs") return Func::abs;
  return std::nullopt;
}

inline const char* func_name(Func f) {
  switch (f) {
    case Func::sin: return "sin";
    case Func::cos: return "cos";
    case Func::exp: return "exp";
    case Func::sqrt: return "sqrt";
    case Func::tanh: return "tanh";
    case Func::abs: return "abs";
  }
  return "?";
}

inline char op_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return '+';
    case BinaryOp::sub: return '-';
    case BinaryOp::mul: return '*';
    case BinaryOp::div: return '/';
    case BinaryOp::pow: return '^';
  }
  return '?';
}

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Constant {
  double value;
};
struct Variable {
  std::string name;
};
struct Negate {
  NodePtr operand;
};
struct Binary {
  BinaryOp op;
  NodePtr lhs, rhs;
};
struct Call {
  Func fn;
  NodePtr arg;
};

struct Node {
  std::variant<Constant, Variable, Negate, Binary, Call> data;
};

inline bool same_structure(const Node& a, const Node& b);

/// Immutable expression tree. Copies share nodes.
class Ast {
 public:
  Ast() : root_(std::make_shared<const Node>(Node{Constant{0.0}})) {}
  explicit Ast(NodePtr root) : root_(std::move(root)) {}

  static Ast constant(double v) { return Ast(std::make_shared<const Node>(Node{Constant{v}})); }
  static Ast variable(std::string name) {
    return Ast(std::make_shared<const Node>(Node{Variable{std::move(name)}}));
  }
  static Ast negate(const Ast& a) { return Ast(std::make_shared<const Node>(Node{Negate{a.root_}})); }
  static Ast binary(BinaryOp op, const Ast& l, const Ast& r) {
    return Ast(std::make_shared<const Node>(Node{Binary{op, l.root_, r.root_}}));
  }
  static Ast call(Func fn, const Ast& a) { return Ast(std::make_shared<const Node>(Node{Call{fn, a.root_}})); }

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }

  friend bool operator==(const Ast& a, const Ast& b) { return same_structure(*a.root_, *b.root_); }

 private:
  NodePtr root_;
};

inline bool same_structure(const Node& a, const Node& b) {
  if (a.data.index() != b.data.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.data);
        if constexpr (std::is_same_v<T, Constant>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, Variable>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return same_structure(*x.operand, *y.operand);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return x.op == y.op && same_structure(*x.lhs, *y.lhs) && same_structure(*x.rhs, *y.rhs);
        } else {
          return x.fn == y.fn && same_structure(*x.arg, *y.arg);
        }
      },
      a.data);
}

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Ast parse_all() {
    skip_ws();
    if (pos_ == src_.size()) throw ParseError(pos_, "empty expression");
    Ast e = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) throw ParseError(pos_, std::string("unexpected '") + src_[pos_] + "'");
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Ast parse_sum() {
    Ast lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = Ast::binary(BinaryOp::add, lhs, parse_product());
      } else if (accept('-')) {
        lhs = Ast::binary(BinaryOp::sub, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  Ast parse_product() {
    Ast lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Ast::binary(BinaryOp::mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = Ast::binary(BinaryOp::div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Ast parse_unary() {
    if (accept('-')) return Ast::negate(parse_unary());
    return parse_power();
  }

  Ast parse_power() {
    Ast base = parse_primary();
    if (accept('^')) return Ast::binary(BinaryOp::pow, base, parse_unary());
    return base;
  }

  Ast parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError(pos_, "unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Ast inner = parse_sum();
      if (!accept(')')) throw ParseError(pos_, "expected ')'");
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (is_ident_start(c)) {
      const std::size_t start = pos_;
      while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
      std::string name(src_.substr(start, pos_ - start));
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '(') {
        auto fn = func_from_name(name);
        if (!fn) throw ParseError(start, "unknown function '" + name + "'");
        ++pos_;
        Ast arg = parse_sum();
        if (!accept(')')) throw ParseError(pos_, "expected ')' after function argument");
        return Ast::call(*fn, arg);
      }
      if (func_from_name(name)) throw ParseError(start, "function '" + name + "' requires an argument");
      return Ast::variable(std::move(name));
    }
    throw ParseError(pos_, std::string("unexpected '") + c + "'");
  }

  Ast parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_, ++k;
      return k;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) throw ParseError(start, "malformed number");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) throw ParseError(pos_, "malformed exponent");
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (ec != std::errc() || ptr != src_.data() + pos_) throw ParseError(start, "malformed number");
    return Ast::constant(v);
  }

  static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

  std::string_view src_;
  std::size_t pos_ = 0;
};

inline void print_node(const Node& n, std::string& out) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Constant>) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.17g", x.value);
          out += buf;
        } else if constexpr (std::is_same_v<T, Variable>) {
          out += x.name;
        } else if constexpr (std::is_same_v<T, Negate>) {
          out += "(-";
          print_node(*x.operand, out);
          out += ')';
        } else if constexpr (std::is_same_v<T, Binary>) {
          out += '(';
          print_node(*x.lhs, out);
          out += ' ';
          out += op_symbol(x.op);
          out += ' ';
          print_node(*x.rhs, out);
          out += ')';
        } else {
          out += func_name(x.fn);
          out += '(';
          print_node(*x.arg, out);
          out += ')';
        }
      },
      n.data);
}

inline void collect_vars(const Node& n, std::set<std::string>& out) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Variable>) {
          out.insert(x.name);
        } else if constexpr (std::is_same_v<T, Negate>) {
          collect_vars(*x.operand, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect_vars(*x.lhs, out);
          collect_vars(*x.rhs, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          collect_vars(*x.arg, out);
        }
      },
      n.data);
}

inline double apply_binary(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::add: return a + b;
    case BinaryOp::sub: return a - b;
    case BinaryOp::mul: return a * b;
    case BinaryOp::div:
      if (b == 0.0) throw EvalError("domain error: division by zero");
      return a / b;
    case BinaryOp::pow: {
      const double r = std::pow(a, b);
      if (std::isnan(r)) throw EvalError("domain error: pow(" + std::to_string(a) + ", " + std::to_string(b) + ")");
      return r;
    }
  }
  return 0.0;
}

inline double apply_func(Func fn, double a) {
  switch (fn) {
    case Func::sin: return std::sin(a);
    case Func::cos: return std::cos(a);
    case Func::exp: return std::exp(a);
    case Func::sqrt:
      if (a < 0.0) throw EvalError("domain error: sqrt of negative value " + std::to_string(a));
      return std::sqrt(a);
    case Func::tanh: return std::tanh(a);
    case Func::abs: return std::fabs(a);
  }
  return 0.0;
}

inline double finite_or_throw(double v) {
  if (!std::isfinite(v)) throw EvalError("domain error: non-finite result");
  return v;
}

}  // namespace detail

inline Ast parse(std::string_view source) { return detail::Parser(source).parse_all(); }

inline std::string print(const Ast& ast) {
  std::string out;
  detail::print_node(ast.root(), out);
  return out;
}

inline std::set<std::string> free_vars(const Ast& ast) {
  std::set<std::string> out;
  detail::collect_vars(ast.root(), out);
  return out;
}

using EvalEnv = std::unordered_map<std::string, double>;

namespace detail {
inline double eval_node(const Node& n, const EvalEnv& env) {
  return std::visit(
      [&](const auto& x) -> double {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return x.value;
        } else if constexpr (std::is_same_v<T, Variable>) {
          auto it = env.find(x.name);
          if (it == env.end()) throw EvalError("missing binding for variable '" + x.name + "'");
          return it->second;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return -eval_node(*x.operand, env);
        } else if constexpr (std::is_same_v<T, Binary>) {
          const double a = eval_node(*x.lhs, env);
          return apply_binary(x.op, a, eval_node(*x.rhs, env));
        } else {
          return apply_func(x.fn, eval_node(*x.arg, env));
        }
      },
      n.data);
}
}  // namespace detail

/// Evaluates with named bindings. Throws EvalError on a missing binding or a
/// domain error (division by zero, sqrt of a negative, non-finite result).
inline double eval(const Ast& ast, const EvalEnv& env) {
  return detail::finite_or_throw(detail::eval_node(ast.root(), env));
}

/// Expression with variables resolved against a fixed symbol table, evaluated
/// from a span of slot values. This is the form used in the solver hot loops.
class BoundExpr {
 public:
  BoundExpr() : BoundExpr(Ast::constant(0.0), {}) {}

  BoundExpr(const Ast& ast, const std::vector<std::string>& symbols) : source_(ast) {
    int depth = 0;
    compile(ast.root(), symbols, depth);
    if (auto* c = std::get_if<Constant>(&ast.root().data)) constant_ = c->value;
  }

  const Ast& ast() const { return source_; }
  bool is_constant() const { return constant_.has_value(); }

  double operator()(std::span<const double> slots) const {
    if (constant_) return *constant_;
    std::array<double, 64> small;
    std::vector<double> large;
    double* stack = small.data();
    if (max_depth_ > static_cast<int>(small.size())) {
      large.resize(static_cast<std::size_t>(max_depth_));
      stack = large.data();
    }
    int sp = 0;
    for (const Instr& in : code_) {
      switch (in.kind) {
        case Instr::push_const: stack[sp++] = in.value; break;
        case Instr::push_slot: stack[sp++] = slots[in.slot]; break;
        case Instr::neg: stack[sp - 1] = -stack[sp - 1]; break;
        case Instr::binary:
          --sp;
          stack[sp - 1] = detail::apply_binary(in.op, stack[sp - 1], stack[sp]);
          break;
        case Instr::call: stack[sp - 1] = detail::apply_func(in.fn, stack[sp - 1]); break;
      }
    }
    return detail::finite_or_throw(stack[0]);
  }

 private:
  struct Instr {
    enum Kind { push_const, push_slot, neg, binary, call } kind;
    double value = 0.0;
    std::size_t slot = 0;
    BinaryOp op = BinaryOp::add;
    Func fn = Func::sin;
  };

  void compile(const Node& n, const std::vector<std::string>& symbols, int& depth) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Constant>) {
            code_.push_back({Instr::push_const, x.value});
            bump(depth, 1);
          } else if constexpr (std::is_same_v<T, Variable>) {
            std::size_t k = 0;
            while (k < symbols.size() && symbols[k] != x.name) ++k;
            if (k == symbols.size()) throw EvalError("variable '" + x.name + "' is not in the symbol table");
            Instr in{Instr::push_slot};
            in.slot = k;
            code_.push_back(in);
            bump(depth, 1);
          } else if constexpr (std::is_same_v<T, Negate>) {
            compile(*x.operand, symbols, depth);
            code_.push_back({Instr::neg});
          } else if constexpr (std::is_same_v<T, Binary>) {
            compile(*x.lhs, symbols, depth);
            compile(*x.rhs, symbols, depth);
            Instr in{Instr::binary};
            in.op = x.op;
            code_.push_back(in);
            --depth;
          } else {
            compile(*x.arg, symbols, depth);
            Instr in{Instr::call};
            in.fn = x.fn;
            code_.push_back(in);
          }
        },
        n.data);
  }

  void bump(int& depth, int by) {
    depth += by;
    if (depth > max_depth_) max_depth_ = depth;
  }

  Ast source_;
  std::vector<Instr> code_;
  int max_depth_ = 0;
  std::optional<double> constant_;
};

}  // namespace hypdich::expr
