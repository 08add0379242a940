// SPDX-License-Identifier: Apache-2.0
//
// Arithmetic expression language over named real variables. Supports
// literals, + - * / ^, unary minus, abs/exp/floor/max/min, comparisons,
// and/or, and first-match piecewise 'cases { cond -> e; ...; else -> e }'.
// Comparisons are exact (no epsilon): piecewise arms switch at exact values.
// Precedence, tightest first: ^  unary-  * /  + -  comparisons  and  or.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bilevel/errors.hpp"

namespace bilevel {

struct SourceSpan {
  std::uint32_t begin = 0, end = 0;  // byte offsets [begin, end)
};

enum class NodeKind : std::uint8_t {
  kLiteral,
  kVariable,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kNeg,
  kAbs,
  kExp,
  kFloor,
  kMax,
  kMin,
  kLess,
  kLessEq,
  kEq,
  kGreaterEq,
  kGreater,
  kAnd,
  kOr,
  kCases,
};

struct Node {
  NodeKind kind = NodeKind::kLiteral;
  SourceSpan span;
  double literal = 0.0;
  std::int32_t name = -1;            // kVariable: index into names()
  std::int32_t a = -1, b = -1;       // children for unary/binary nodes
  std::vector<std::int32_t> parts;   // kCases: cond0,val0,...,elseVal
};

// Which side a one-sided limit approaches a boundary value from.
enum class Side : std::uint8_t { kExact, kBelow, kAbove };

class Expr {
 public:
  Expr() = default;
  static Expr parse(const std::string& source);

  std::string to_string() const;
  const std::vector<std::string>& names() const { return names_; }
  bool uses(const std::string& name) const;
  bool same_structure(const Expr& other) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  std::int32_t root() const { return root_; }
  // Standalone copy of the subtree rooted at `node`.
  Expr subtree(std::int32_t node) const;

 private:
  friend class ExprBuilder;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
  std::vector<std::string> names_;
};

// Programmatic AST construction (game and robust bridges synthesize
// objectives directly instead of printing and re-parsing text).
class ExprBuilder {
 public:
  std::int32_t literal(double v);
  std::int32_t variable(const std::string& name);
  std::int32_t unary(NodeKind k, std::int32_t a);
  std::int32_t binary(NodeKind k, std::int32_t a, std::int32_t b);
  // pairs: cond,value alternating; else_value closes the chain.
  std::int32_t cases(const std::vector<std::int32_t>& pairs,
                     std::int32_t else_value);
  void set_span(std::int32_t node, SourceSpan span);
  SourceSpan span_of(std::int32_t node) const;
  Expr finish(std::int32_t root) &&;

 private:
  Expr out_;
};

// Expression with variables resolved to slots of a shared environment.
// evaluate() throws EvalError on division by zero and on NaN results;
// infinities propagate normally so limits at +-inf can be evaluated.
class BoundExpr {
 public:
  BoundExpr() = default;
  // env lists slot names in order; every variable must appear (BindError).
  BoundExpr(const Expr* e, const std::vector<std::string>& env);

  double evaluate(std::span<const double> slots) const;
  // One-sided evaluation: comparisons of the bare variable in `limit_slot`
  // against an equal bound resolve as if the variable sat infinitesimally
  // below/above slots[limit_slot]. Everything else evaluates normally.
  double evaluate_limit(std::span<const double> slots, std::int32_t limit_slot,
                        Side side) const;
  // Evaluate an arbitrary subtree (used for threshold values).
  double evaluate_node(std::int32_t node, std::span<const double> slots) const;

  const Expr* expr() const { return expr_; }
  std::int32_t slot_of_name(std::int32_t name_index) const {
    return slots_[static_cast<std::size_t>(name_index)];
  }

 private:
  double eval(std::int32_t node, std::span<const double> slots,
              std::int32_t limit_slot, Side side) const;

  const Expr* expr_ = nullptr;
  std::vector<std::int32_t> slots_;  // name index -> slot index
};

// A comparison of a bare variable against a subexpression free of that
// variable; the exact values where piecewise arms can switch.
struct Threshold {
  std::string var;
  std::int32_t value_node;  // subtree of the owning Expr
};
std::vector<Threshold> thresholds(const Expr& e);

}  // namespace bilevel
