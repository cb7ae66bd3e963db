#include "hypdich/expr.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <thread>

using namespace hypdich::expr;

namespace {

Ast var(const char* n) { return Ast::variable(n); }
Ast num(double v) { return Ast::constant(v); }

double ev(const char* src, const EvalEnv& env = {}) { return eval(parse(src), env); }

// Random trees over {x, t, u1, u2}; constants are non-negative because a
// leading '-' parses as negation.
class TreeGen {
 public:
  explicit TreeGen(std::uint64_t seed) : rng_(seed) {}

  Ast tree(int depth) {
    const int pick = depth == 0 ? static_cast<int>(rng_() % 2) : static_cast<int>(rng_() % 5);
    switch (pick) {
      case 0: return num(constant());
      case 1: return var(kVars[rng_() % 4]);
      case 2: return Ast::negate(tree(depth - 1));
      case 3: return Ast::binary(static_cast<BinaryOp>(rng_() % 5), tree(depth - 1), tree(depth - 1));
      default: return Ast::call(static_cast<Func>(rng_() % 6), tree(depth - 1));
    }
  }

  double constant() {
    switch (rng_() % 4) {
      case 0: return static_cast<double>(rng_() % 10);
      case 1: return std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
      case 2: return std::ldexp(std::uniform_real_distribution<double>(1.0, 2.0)(rng_), static_cast<int>(rng_() % 80) - 40);
      default: return 1e-300 * static_cast<double>(rng_() % 7);
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  static constexpr const char* kVars[4] = {"x", "t", "u1", "u2"};
  std::mt19937_64 rng_;
};

}  // namespace

TEST(Parse, Literal) { EXPECT_EQ(parse("1"), num(1.0)); }

TEST(Parse, GrammarShape) {
  const Ast expected = Ast::binary(BinaryOp::add, Ast::call(Func::sin, var("t")), Ast::binary(BinaryOp::mul, var("x"), var("u1")));
  EXPECT_EQ(parse("sin(t) + x*u1"), expected);
}

TEST(Parse, PowerIsRightAssociative) {
  EXPECT_DOUBLE_EQ(ev("2^3^2"), 512.0);
  EXPECT_EQ(parse("2^3^2"), Ast::binary(BinaryOp::pow, num(2), Ast::binary(BinaryOp::pow, num(3), num(2))));
}

TEST(Parse, PrecedenceTable) {
  EXPECT_DOUBLE_EQ(ev("-2^2"), -4.0);   // ^ binds tighter than unary minus
  EXPECT_DOUBLE_EQ(ev("2^-1"), 0.5);
  EXPECT_DOUBLE_EQ(ev("10-4-3"), 3.0);  // left associative
  EXPECT_DOUBLE_EQ(ev("12/3/2"), 2.0);
  EXPECT_DOUBLE_EQ(ev("1+2*3"), 7.0);
  EXPECT_DOUBLE_EQ(ev("-3*-2"), 6.0);
  EXPECT_DOUBLE_EQ(ev("(1+2)*3"), 9.0);
  EXPECT_DOUBLE_EQ(ev("1.5e2 + .5"), 150.5);
}

TEST(Parse, ErrorOffsets) {
  try {
    parse("1 + * x");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  try {
    parse("sin(x");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 5u);
  }
  try {
    parse("2 * foo(x)");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
    EXPECT_NE(std::string(e.what()).find("foo"), std::string::npos);
  }
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("1 2"), ParseError);
  EXPECT_THROW(parse("1e"), ParseError);
  EXPECT_THROW(parse("sin"), ParseError);
  EXPECT_THROW(parse("x $ y"), ParseError);
}

TEST(Eval, Basics) {
  EXPECT_DOUBLE_EQ(ev("x*t", {{"x", 0.5}, {"t", 2.0}}), 1.0);
  EXPECT_DOUBLE_EQ(ev("exp(0)"), 1.0);
  EXPECT_NEAR(ev("sin(t)", {{"t", std::numbers::pi / 2}}), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(ev("abs(-3) + sqrt(16) + tanh(0) + cos(0)"), 8.0);
}

TEST(Eval, DomainErrorsAreReported) {
  EXPECT_THROW(ev("x"), EvalError);
  EXPECT_THROW(ev("1/0"), EvalError);
  EXPECT_THROW(ev("sqrt(-1)"), EvalError);
  EXPECT_THROW(ev("exp(1000)"), EvalError);
  EXPECT_THROW(ev("(-8)^(1/3)"), EvalError);
}

TEST(FreeVars, Sets) {
  EXPECT_TRUE(free_vars(parse("1+2")).empty());
  EXPECT_EQ(free_vars(parse("x*u2")), (std::set<std::string>{"x", "u2"}));
  EXPECT_EQ(free_vars(parse("sin(t)+sin(t)")), (std::set<std::string>{"t"}));
}

TEST(Print, RoundTripRandomTrees) {
  TreeGen gen(20240601);
  for (int k = 0; k < 2000; ++k) {
    const Ast a = gen.tree(static_cast<int>(gen.rng()() % 7));
    const std::string s = print(a);
    ASSERT_EQ(parse(s), a) << s;
  }
}

TEST(Eval, PrecedenceAgreesWithParentheses) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const Ast flat = parse("a+b*c"), grouped = parse("a+(b*c)");
  const Ast flat2 = parse("a*b^c"), grouped2 = parse("a*(b^c)");
  for (int k = 0; k < 200; ++k) {
    const EvalEnv env{{"a", u(rng)}, {"b", std::fabs(u(rng)) + 0.1}, {"c", u(rng)}};
    EXPECT_EQ(eval(flat, env), eval(grouped, env));
    EXPECT_EQ(eval(flat2, env), eval(grouped2, env));
  }
}

TEST(BoundExpr, MatchesTreeEvaluation) {
  TreeGen gen(99);
  const std::vector<std::string> syms{"x", "t", "u1", "u2"};
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  int compared = 0;
  for (int k = 0; k < 1000; ++k) {
    const Ast a = gen.tree(4);
    const BoundExpr b(a, syms);
    const double slots[4] = {u(gen.rng()), u(gen.rng()), u(gen.rng()), u(gen.rng())};
    const EvalEnv env{{"x", slots[0]}, {"t", slots[1]}, {"u1", slots[2]}, {"u2", slots[3]}};
    double ref = 0.0;
    try {
      ref = eval(a, env);
    } catch (const EvalError&) {
      EXPECT_THROW(b(slots), EvalError);
      continue;
    }
    EXPECT_EQ(b(slots), ref);
    ++compared;
  }
  EXPECT_GT(compared, 300);
}

TEST(BoundExpr, UnknownSymbolRejected) { EXPECT_THROW(BoundExpr(parse("x + q"), {"x", "t"}), EvalError); }

TEST(Eval, PureAcrossThreads) {
  const Ast a = parse("sin(x)*exp(-t) + u1^2");
  const EvalEnv env{{"x", 0.3}, {"t", 1.7}, {"u1", -0.4}};
  const double ref = eval(a, env);
  std::vector<double> got(4);
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w)
    pool.emplace_back([&, w] {
      double v = 0.0;
      for (int k = 0; k < 1000; ++k) v = eval(a, env);
      got[static_cast<std::size_t>(w)] = v;
    });
  for (auto& th : pool) th.join();
  for (double v : got) EXPECT_EQ(v, ref);
}
