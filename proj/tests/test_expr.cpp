// SPDX-License-Identifier: Apache-2.0
#include "bilevel/expr.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"

using bilevel::BindError;
using bilevel::BoundExpr;
using bilevel::EvalError;
using bilevel::Expr;
using bilevel::ExprBuilder;
using bilevel::NodeKind;
using bilevel::ParseError;
using bilevel::Side;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double eval1(const std::string& src, double x) {
  const Expr e = Expr::parse(src);
  const BoundExpr b(&e, {"x"});
  const double slots[] = {x};
  return b.evaluate(slots);
}

double eval2(const std::string& src, double x, double y) {
  const Expr e = Expr::parse(src);
  const BoundExpr b(&e, {"x", "y"});
  const double slots[] = {x, y};
  return b.evaluate(slots);
}

}  // namespace

TEST_CASE("precedence and associativity") {
  CHECK(eval1("1 + 2 * 3", 0) == 7.0);
  CHECK(eval1("(1 + 2) * 3", 0) == 9.0);
  CHECK(eval1("1 - 2 - 3", 0) == -4.0);
  CHECK(eval1("1 - (2 - 3)", 0) == 2.0);
  CHECK(eval1("6 / 3 / 2", 0) == 1.0);
  CHECK(eval1("2 * 3 ^ 2", 0) == 18.0);
  CHECK(eval1("2 ^ 3 ^ 2", 0) == 512.0);   // right-associative
  CHECK(eval1("(2 ^ 3) ^ 2", 0) == 64.0);
  CHECK(eval1("-x ^ 2", 3) == -9.0);       // ^ binds tighter than unary -
  CHECK(eval1("(-x) ^ 2", 3) == 9.0);
  CHECK(eval1("x ^ -1", 4) == 0.25);
  CHECK(eval1("-x * 2", 3) == -6.0);       // unary - binds tighter than *
  CHECK(eval1("--3", 0) == 3.0);
  // Comparisons sit below arithmetic, 'and' below comparisons, 'or' lowest.
  CHECK(eval1("1 + 1 < 3", 0) == 1.0);
  CHECK(eval1("1 < 0 or 2 < 3", 0) == 1.0);
  CHECK(eval1("0 < 1 and 1 < 0 or 1 < 2", 0) == 1.0);  // (a and b) or c
  CHECK(eval1("1 < 2 and (1 < 0 or 0 < 1)", 0) == 1.0);
}

TEST_CASE("comparison and boolean results are 0/1") {
  CHECK(eval1("x < 1", 0.5) == 1.0);
  CHECK(eval1("x < 1", 1.0) == 0.0);
  CHECK(eval1("x <= 1", 1.0) == 1.0);
  CHECK(eval1("x = 1", 1.0) == 1.0);
  CHECK(eval1("x = 1", 1.0 + 1e-15) == 0.0);  // exact, no epsilon
  CHECK(eval1("x >= 1", 1.0) == 1.0);
  CHECK(eval1("x > 1", 1.0) == 0.0);
  CHECK(eval1("x > 0 and x < 1", 0.5) == 1.0);
  CHECK(eval1("x > 0 and x < 1", 2.0) == 0.0);
  CHECK(eval1("x < 0 or x > 1", 2.0) == 1.0);
}

TEST_CASE("cases picks the first matching arm") {
  const std::string pw =
      "cases { x < 0 -> 0 - x; x = 0 -> 100; else -> x }";
  CHECK(eval1(pw, -3) == 3.0);
  CHECK(eval1(pw, 0) == 100.0);
  CHECK(eval1(pw, 5) == 5.0);
  // Overlapping conditions: first match wins.
  const std::string overlap =
      "cases { x < 10 -> 1; x < 20 -> 2; else -> 3 }";
  CHECK(eval1(overlap, 5) == 1.0);
  CHECK(eval1(overlap, 15) == 2.0);
  CHECK(eval1(overlap, 25) == 3.0);
}

TEST_CASE("builtin functions") {
  CHECK(eval1("abs(0 - 3)", 0) == 3.0);
  CHECK(eval1("abs(x)", -2.5) == 2.5);
  CHECK(eval1("floor(x)", 2.7) == 2.0);
  CHECK(eval1("floor(x)", -0.5) == -1.0);
  CHECK(eval1("max(x, 0)", -4) == 0.0);
  CHECK(eval1("min(x, 0)", -4) == -4.0);
  CHECK(eval1("exp(x)", 0) == 1.0);
  CHECK(eval1("exp(x)", 1) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("infinities propagate; undefined results throw") {
  CHECK(eval1("x + 1", kInf) == kInf);
  CHECK(eval2("exp(x - y)", 0.0, 0.0) == 1.0);  // sanity on finite input
  CHECK(eval2("exp(x - y)", 0.0, kInf) == 0.0);
  CHECK(eval2("exp(x - y)", kInf, 0.0) == kInf);
  CHECK(eval1("2 ^ x", -kInf) == 0.0);
  CHECK_THROWS_AS(eval1("x - x", kInf), EvalError);       // inf - inf
  CHECK_THROWS_AS(eval1("0 * x", kInf), EvalError);       // 0 * inf
  CHECK_THROWS_AS(eval1("(0 - 8) ^ x", 1.0 / 3.0), EvalError);
}

TEST_CASE("division by zero reports the dividing node's span") {
  const std::string src = "1 / (x - 1)";
  const Expr e = Expr::parse(src);
  const BoundExpr b(&e, {"x"});
  const double slots[] = {1.0};
  try {
    b.evaluate(slots);
    FAIL("expected EvalError");
  } catch (const EvalError& err) {
    CHECK(err.begin() == 0);
    CHECK(err.end() == src.size());
    CHECK(std::string(err.what()) == "division by zero");
  }
  // Nonzero divisor is fine even when tiny.
  const double near[] = {1.0 + 1e-12};
  CHECK(b.evaluate(near) == doctest::Approx(1e12).epsilon(1e-3));
}

TEST_CASE("binding errors name the unbound variable") {
  const Expr e = Expr::parse("x + q * 2");
  try {
    BoundExpr b(&e, {"x", "y"});
    FAIL("expected BindError");
  } catch (const BindError& err) {
    CHECK(err.name() == "q");
  }
  CHECK_NOTHROW(BoundExpr(&e, {"q", "x"}));
}

TEST_CASE("variables bind by name to environment slots") {
  const Expr e = Expr::parse("x - y");
  // Same expression, two different slot layouts.
  const BoundExpr xy(&e, {"x", "y"});
  const BoundExpr yx(&e, {"y", "x"});
  const double s[] = {5.0, 2.0};
  CHECK(xy.evaluate(s) == 3.0);   // x=5, y=2
  CHECK(yx.evaluate(s) == -3.0);  // y=5, x=2
}

TEST_CASE("one-sided evaluation resolves exact boundary ties") {
  const Expr e = Expr::parse("cases { y <= 1 -> 0; else -> 10 }");
  const BoundExpr b(&e, {"x", "y"});
  const double at1[] = {0.0, 1.0};
  CHECK(b.evaluate(at1) == 0.0);
  CHECK(b.evaluate_limit(at1, 1, Side::kBelow) == 0.0);   // y -> 1^-
  CHECK(b.evaluate_limit(at1, 1, Side::kAbove) == 10.0);  // y -> 1^+
  CHECK(b.evaluate_limit(at1, 1, Side::kExact) == 0.0);
  // Away from the boundary the side is irrelevant.
  const double at2[] = {0.0, 2.0};
  CHECK(b.evaluate_limit(at2, 1, Side::kBelow) == 10.0);
  CHECK(b.evaluate_limit(at2, 1, Side::kAbove) == 10.0);

  // Variable on the right-hand side of the comparison.
  const Expr m = Expr::parse("cases { 1 <= y -> 5; else -> 7 }");
  const BoundExpr bm(&m, {"x", "y"});
  CHECK(bm.evaluate(at1) == 5.0);
  CHECK(bm.evaluate_limit(at1, 1, Side::kBelow) == 7.0);
  CHECK(bm.evaluate_limit(at1, 1, Side::kAbove) == 5.0);

  // Strict comparison: y -> 1^- satisfies y < 1.
  const Expr s = Expr::parse("cases { y < 1 -> 0; else -> 10 }");
  const BoundExpr bs(&s, {"x", "y"});
  CHECK(bs.evaluate(at1) == 10.0);
  CHECK(bs.evaluate_limit(at1, 1, Side::kBelow) == 0.0);
  CHECK(bs.evaluate_limit(at1, 1, Side::kAbove) == 10.0);

  // Equality can only hold exactly.
  const Expr q = Expr::parse("cases { y = 1 -> 42; else -> 0 }");
  const BoundExpr bq(&q, {"x", "y"});
  CHECK(bq.evaluate(at1) == 42.0);
  CHECK(bq.evaluate_limit(at1, 1, Side::kBelow) == 0.0);
  CHECK(bq.evaluate_limit(at1, 1, Side::kAbove) == 0.0);

  // The limit applies only to the chosen slot.
  const double bothone[] = {1.0, 1.0};
  const Expr fx = Expr::parse("cases { x <= 1 -> 0; else -> 10 }");
  const BoundExpr bfx(&fx, {"x", "y"});
  CHECK(bfx.evaluate_limit(bothone, 1, Side::kAbove) == 0.0);
}

TEST_CASE("one-sided evaluation displaces floor at integers") {
  const Expr e = Expr::parse("floor(y)");
  const BoundExpr b(&e, {"y"});
  const double at2[] = {2.0};
  CHECK(b.evaluate(at2) == 2.0);
  CHECK(b.evaluate_limit(at2, 0, Side::kBelow) == 1.0);  // floor(2 - eps)
  CHECK(b.evaluate_limit(at2, 0, Side::kAbove) == 2.0);  // floor(2 + eps)
  const double at25[] = {2.5};
  CHECK(b.evaluate_limit(at25, 0, Side::kBelow) == 2.0);
  CHECK(b.evaluate_limit(at25, 0, Side::kAbove) == 2.0);
}

TEST_CASE("threshold extraction finds bare-variable comparisons") {
  const Expr e =
      Expr::parse("cases { y > 1 / 2 -> x - y; else -> x ^ 2 + y ^ 2 }");
  const auto th = bilevel::thresholds(e);
  REQUIRE(th.size() == 1);
  CHECK(th[0].var == "y");
  const BoundExpr b(&e, {"x", "y"});
  const double slots[] = {0.0, 0.0};
  CHECK(b.evaluate_node(th[0].value_node, slots) == 0.5);

  // A comparison of two bare variables thresholds both of them.
  const Expr e2 = Expr::parse("x < 1 and y >= x");
  const auto th2 = bilevel::thresholds(e2);
  REQUIRE(th2.size() == 3);
  CHECK(th2[0].var == "x");
  CHECK(e2.subtree(th2[0].value_node).to_string() == "1");
  CHECK(th2[1].var == "y");
  CHECK(e2.subtree(th2[1].value_node).to_string() == "x");
  CHECK(th2[2].var == "x");
  CHECK(e2.subtree(th2[2].value_node).to_string() == "y");

  // y vs an expression involving y is not a usable threshold.
  const Expr e3 = Expr::parse("y < 2 * y + 1");
  CHECK(bilevel::thresholds(e3).empty());
}

TEST_CASE("parse errors carry span and expectation") {
  try {
    Expr::parse("1 +");
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.begin() == 3);
    CHECK(err.expected() == "a value");
  }
  CHECK_THROWS_AS(Expr::parse("1 < 2 < 3"), ParseError);
  CHECK_THROWS_AS(Expr::parse("max(1)"), ParseError);
  CHECK_THROWS_AS(Expr::parse("cases { x -> 1 }"), ParseError);
  CHECK_THROWS_AS(Expr::parse("cases { else -> 1; x < 0 -> 2 }"), ParseError);
  CHECK_THROWS_AS(Expr::parse("cases { }"), ParseError);
  CHECK_THROWS_AS(Expr::parse("x + * y"), ParseError);
  CHECK_THROWS_AS(Expr::parse("(x + y"), ParseError);
  CHECK_THROWS_AS(Expr::parse("x $ y"), ParseError);
  CHECK_THROWS_AS(Expr::parse(""), ParseError);
  CHECK_THROWS_AS(Expr::parse("x y"), ParseError);
}

TEST_CASE("printing is canonical and structure-preserving") {
  const std::pair<const char*, const char*> table[] = {
      {"1+2*3", "1 + 2 * 3"},
      {"(1+2)*3", "(1 + 2) * 3"},
      {"1-(2-3)", "1 - (2 - 3)"},
      {"((1-2))-3", "1 - 2 - 3"},
      {"-x^2", "-x ^ 2"},
      {"(-x)^2", "(-x) ^ 2"},
      {"2^(3^2)", "2 ^ 3 ^ 2"},
      {"(2^3)^2", "(2 ^ 3) ^ 2"},
      {"a/(b*c)", "a / (b * c)"},
      {"a/b*c", "a / b * c"},
      {"x<1 and y>2 or z=3", "x < 1 and y > 2 or z = 3"},
      {"(x<1 or y>2) and z=3", "(x < 1 or y > 2) and z = 3"},
      {"cases{x<0->-x;else->x}", "cases { x < 0 -> -x; else -> x }"},
      {"max( x , min(y,0) )", "max(x, min(y, 0))"},
      {"-(a+b)", "-(a + b)"},
      {"-a+b", "-a + b"},
      {"inf", "inf"},
      {"-inf", "-inf"},
      {"x^-1", "x ^ (-1)"},
      {"0.5", "0.5"},
      {"1e3", "1000"},
      {"2.5e-1", "0.25"},
  };
  for (const auto& [input, want] : table) {
    CAPTURE(input);
    const Expr e = Expr::parse(input);
    CHECK(e.to_string() == want);
    const Expr back = Expr::parse(e.to_string());
    CHECK(e.same_structure(back));
    CHECK(back.to_string() == want);  // printing is a fixed point
  }
}

TEST_CASE("negative literals from programmatic construction round-trip") {
  ExprBuilder b;
  const auto root = b.binary(NodeKind::kAdd, b.literal(-2.0), b.variable("x"));
  const Expr e = std::move(b).finish(root);
  CHECK(e.to_string() == "-2 + x");
  const Expr back = Expr::parse(e.to_string());
  const BoundExpr be(&e, {"x"});
  const BoundExpr bb(&back, {"x"});
  const double s[] = {7.0};
  CHECK(be.evaluate(s) == bb.evaluate(s));
}

TEST_CASE("random expressions survive print -> parse -> print") {
  std::mt19937 rng(0x5eed0e01u);
  const double literals[] = {0.0, 1.0, 2.0, 0.5, 0.25, 3.75, 10.0, 0.001,
                             7.0, kInf, 1.0 / 3.0, 6.02e23};
  const char* vars[] = {"x", "y", "z"};
  const NodeKind binaries[] = {
      NodeKind::kAdd, NodeKind::kSub, NodeKind::kMul, NodeKind::kDiv,
      NodeKind::kPow, NodeKind::kMax, NodeKind::kMin};
  const NodeKind unaries[] = {NodeKind::kNeg, NodeKind::kAbs, NodeKind::kExp,
                              NodeKind::kFloor};
  const NodeKind compares[] = {NodeKind::kLess, NodeKind::kLessEq,
                               NodeKind::kEq, NodeKind::kGreaterEq,
                               NodeKind::kGreater};

  struct Gen {
    std::mt19937& rng;
    ExprBuilder& b;
    const double* lits;
    const char* const* vars;
    const NodeKind* bins;
    const NodeKind* uns;
    const NodeKind* cmps;
    int pick(int n) {
      return static_cast<int>(rng() % static_cast<unsigned>(n));
    }
    // Arithmetic-valued subtree.
    std::int32_t arith(int depth) {
      if (depth <= 0 || pick(4) == 0) {
        return pick(2) ? b.literal(lits[pick(12)])
                       : b.variable(vars[pick(3)]);
      }
      switch (pick(8)) {
        case 0: return b.unary(uns[pick(4)], arith(depth - 1));
        case 1: {
          std::vector<std::int32_t> pairs;
          const int arms = 1 + pick(2);
          for (int k = 0; k < arms; ++k) {
            pairs.push_back(boolean(depth - 1));
            pairs.push_back(arith(depth - 1));
          }
          return b.cases(pairs, arith(depth - 1));
        }
        default: {
          const auto lhs = arith(depth - 1);
          const auto rhs = arith(depth - 1);
          return b.binary(bins[pick(7)], lhs, rhs);
        }
      }
    }
    // Boolean-valued subtree (comparisons joined by and/or).
    std::int32_t boolean(int depth) {
      const auto lhs = arith(depth > 0 ? depth - 1 : 0);
      const auto rhs = arith(depth > 0 ? depth - 1 : 0);
      std::int32_t node = b.binary(cmps[pick(5)], lhs, rhs);
      if (depth > 0 && pick(3) == 0) {
        const auto other = boolean(depth - 1);
        node = b.binary(pick(2) ? NodeKind::kAnd : NodeKind::kOr, node, other);
      }
      return node;
    }
  };

  for (int iter = 0; iter < 2000; ++iter) {
    ExprBuilder b;
    Gen gen{rng, b, literals, vars, binaries, unaries, compares};
    const std::int32_t root = gen.arith(4);
    const Expr e = std::move(b).finish(root);
    const std::string text = e.to_string();
    CAPTURE(iter);
    CAPTURE(text);
    const Expr back = Expr::parse(text);
    REQUIRE(e.same_structure(back));
    REQUIRE(back.to_string() == text);
  }
}

TEST_CASE("name tracking") {
  const Expr e = Expr::parse("b + a * b - c");
  REQUIRE(e.names().size() == 3);
  CHECK(e.names()[0] == "b");  // first-use order
  CHECK(e.names()[1] == "a");
  CHECK(e.names()[2] == "c");
  CHECK(e.uses("a"));
  CHECK(e.uses("c"));
  CHECK_FALSE(e.uses("q"));
}

TEST_CASE("root span covers the full expression") {
  const std::string src = "x + y";
  const Expr e = Expr::parse(src);
  const auto& root = e.nodes()[static_cast<std::size_t>(e.root())];
  CHECK(root.span.begin == 0);
  CHECK(root.span.end == src.size());
}

TEST_CASE("follower stage cost arithmetic on the duopoly form") {
  // 2y - y * max(4 - (x + y), 0) at (1, 1/2): revenue 1, margin 1.25.
  const double v = eval2("2 * y - y * max(4 - (x + y), 0)", 1.0, 0.5);
  CHECK(v == -0.25);
  // Reduced leader objective x * (x - 2) / 2 at the same point.
  CHECK(eval1("x * (x - 2) / 2", 1.0) == -0.5);
}
