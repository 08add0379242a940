// SPDX-License-Identifier: Apache-2.0
#include "bilevel/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>

#include "bilevel/numfmt.hpp"

namespace bilevel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Lexer

enum class Tok : std::uint8_t {
  kNumber, kIdent, kLParen, kRParen, kLBrace, kRBrace, kComma, kSemi,
  kArrow, kPlus, kMinus, kStar, kSlash, kCaret,
  kLess, kLessEq, kEq, kGreaterEq, kGreater,
  kKwCases, kKwElse, kKwAnd, kKwOr, kKwInf,
  kKwAbs, kKwExp, kKwFloor, kKwMax, kKwMin,
  kEnd,
};

const char* tok_label(Tok t) {
  switch (t) {
    case Tok::kNumber: return "number";
    case Tok::kIdent: return "identifier";
    case Tok::kLParen: return "'('";
    case Tok::kRParen: return "')'";
    case Tok::kLBrace: return "'{'";
    case Tok::kRBrace: return "'}'";
    case Tok::kComma: return "','";
    case Tok::kSemi: return "';'";
    case Tok::kArrow: return "'->'";
    case Tok::kPlus: return "'+'";
    case Tok::kMinus: return "'-'";
    case Tok::kStar: return "'*'";
    case Tok::kSlash: return "'/'";
    case Tok::kCaret: return "'^'";
    case Tok::kLess: return "'<'";
    case Tok::kLessEq: return "'<='";
    case Tok::kEq: return "'='";
    case Tok::kGreaterEq: return "'>='";
    case Tok::kGreater: return "'>'";
    case Tok::kKwCases: return "'cases'";
    case Tok::kKwElse: return "'else'";
    case Tok::kKwAnd: return "'and'";
    case Tok::kKwOr: return "'or'";
    case Tok::kKwInf: return "'inf'";
    case Tok::kKwAbs: return "'abs'";
    case Tok::kKwExp: return "'exp'";
    case Tok::kKwFloor: return "'floor'";
    case Tok::kKwMax: return "'max'";
    case Tok::kKwMin: return "'min'";
    case Tok::kEnd: return "end of input";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::kEnd;
  SourceSpan span;
  double number = 0.0;
  std::string text;  // identifiers
};

bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = src.size();
  auto push = [&](Tok k, std::size_t b, std::size_t e) {
    Token t;
    t.kind = k;
    t.span = {static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(e)};
    out.push_back(std::move(t));
  };
  while (i < n) {
    const char c = src[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t b = i;
    if (digit(c) || (c == '.' && i + 1 < n && digit(src[i + 1]))) {
      std::size_t e = i;
      while (e < n && digit(src[e])) ++e;
      if (e < n && src[e] == '.') {
        ++e;
        while (e < n && digit(src[e])) ++e;
      }
      if (e < n && (src[e] == 'e' || src[e] == 'E')) {
        std::size_t m = e + 1;
        if (m < n && (src[m] == '+' || src[m] == '-')) ++m;
        if (m < n && digit(src[m])) {
          e = m;
          while (e < n && digit(src[e])) ++e;
        }
      }
      double v = 0.0;
      auto [p, ec] = std::from_chars(src.data() + b, src.data() + e, v);
      if (ec != std::errc() || p != src.data() + e) {
        throw ParseError("malformed number", b, e, "number");
      }
      push(Tok::kNumber, b, e);
      out.back().number = v;
      i = e;
      continue;
    }
    if (ident_start(c)) {
      std::size_t e = i;
      while (e < n && ident_char(src[e])) ++e;
      std::string word = src.substr(b, e - b);
      Tok k = Tok::kIdent;
      if (word == "cases") k = Tok::kKwCases;
      else if (word == "else") k = Tok::kKwElse;
      else if (word == "and") k = Tok::kKwAnd;
      else if (word == "or") k = Tok::kKwOr;
      else if (word == "inf") k = Tok::kKwInf;
      else if (word == "abs") k = Tok::kKwAbs;
      else if (word == "exp") k = Tok::kKwExp;
      else if (word == "floor") k = Tok::kKwFloor;
      else if (word == "max") k = Tok::kKwMax;
      else if (word == "min") k = Tok::kKwMin;
      push(k, b, e);
      if (k == Tok::kIdent) out.back().text = std::move(word);
      i = e;
      continue;
    }
    switch (c) {
      case '(': push(Tok::kLParen, b, b + 1); ++i; break;
      case ')': push(Tok::kRParen, b, b + 1); ++i; break;
      case '{': push(Tok::kLBrace, b, b + 1); ++i; break;
      case '}': push(Tok::kRBrace, b, b + 1); ++i; break;
      case ',': push(Tok::kComma, b, b + 1); ++i; break;
      case ';': push(Tok::kSemi, b, b + 1); ++i; break;
      case '+': push(Tok::kPlus, b, b + 1); ++i; break;
      case '*': push(Tok::kStar, b, b + 1); ++i; break;
      case '/': push(Tok::kSlash, b, b + 1); ++i; break;
      case '^': push(Tok::kCaret, b, b + 1); ++i; break;
      case '=': push(Tok::kEq, b, b + 1); ++i; break;
      case '-':
        if (i + 1 < n && src[i + 1] == '>') {
          push(Tok::kArrow, b, b + 2);
          i += 2;
        } else {
          push(Tok::kMinus, b, b + 1);
          ++i;
        }
        break;
      case '<':
        if (i + 1 < n && src[i + 1] == '=') {
          push(Tok::kLessEq, b, b + 2);
          i += 2;
        } else {
          push(Tok::kLess, b, b + 1);
          ++i;
        }
        break;
      case '>':
        if (i + 1 < n && src[i + 1] == '=') {
          push(Tok::kGreaterEq, b, b + 2);
          i += 2;
        } else {
          push(Tok::kGreater, b, b + 1);
          ++i;
        }
        break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", b,
                         b + 1, "expression");
    }
  }
  push(Tok::kEnd, n, n);
  return out;
}

// ---------------------------------------------------------------------------
// Parser (recursive descent, precedence-layered)

class Parser {
 public:
  explicit Parser(const std::string& src) : toks_(lex(src)) {}

  Expr run() {
    ExprBuilder b;
    builder_ = &b;
    const std::int32_t root = parse_or();
    expect(Tok::kEnd);
    return std::move(b).finish(root);
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }
  bool at(Tok k) const { return peek().kind == k; }
  bool accept(Tok k) {
    if (!at(k)) return false;
    ++pos_;
    return true;
  }
  Token expect(Tok k) {
    if (!at(k)) {
      throw ParseError(std::string("expected ") + tok_label(k) + ", found " +
                           tok_label(peek().kind),
                       peek().span.begin, peek().span.end, tok_label(k));
    }
    return take();
  }
  [[noreturn]] void fail_expected(const char* what) const {
    throw ParseError(std::string("expected ") + what + ", found " +
                         tok_label(peek().kind),
                     peek().span.begin, peek().span.end, what);
  }

  std::int32_t with_span(std::int32_t node, std::uint32_t begin,
                         std::uint32_t end);

  std::int32_t parse_or() {
    std::int32_t lhs = parse_and();
    while (at(Tok::kKwOr)) {
      const std::uint32_t b = span_begin(lhs);
      take();
      const std::int32_t rhs = parse_and();
      lhs = with_span(builder_->binary(NodeKind::kOr, lhs, rhs), b,
                      span_end(rhs));
    }
    return lhs;
  }

  std::int32_t parse_and() {
    std::int32_t lhs = parse_cmp();
    while (at(Tok::kKwAnd)) {
      const std::uint32_t b = span_begin(lhs);
      take();
      const std::int32_t rhs = parse_cmp();
      lhs = with_span(builder_->binary(NodeKind::kAnd, lhs, rhs), b,
                      span_end(rhs));
    }
    return lhs;
  }

  std::int32_t parse_cmp() {
    std::int32_t lhs = parse_add();
    NodeKind k;
    switch (peek().kind) {
      case Tok::kLess: k = NodeKind::kLess; break;
      case Tok::kLessEq: k = NodeKind::kLessEq; break;
      case Tok::kEq: k = NodeKind::kEq; break;
      case Tok::kGreaterEq: k = NodeKind::kGreaterEq; break;
      case Tok::kGreater: k = NodeKind::kGreater; break;
      default: return lhs;
    }
    const std::uint32_t b = span_begin(lhs);
    take();
    const std::int32_t rhs = parse_add();
    const std::int32_t node =
        with_span(builder_->binary(k, lhs, rhs), b, span_end(rhs));
    switch (peek().kind) {
      case Tok::kLess:
      case Tok::kLessEq:
      case Tok::kEq:
      case Tok::kGreaterEq:
      case Tok::kGreater:
        throw ParseError("comparisons do not chain; combine them with 'and'",
                         peek().span.begin, peek().span.end,
                         "'and', 'or' or end of comparison");
      default: break;
    }
    return node;
  }

  std::int32_t parse_add() {
    std::int32_t lhs = parse_mul();
    while (at(Tok::kPlus) || at(Tok::kMinus)) {
      const NodeKind k = at(Tok::kPlus) ? NodeKind::kAdd : NodeKind::kSub;
      const std::uint32_t b = span_begin(lhs);
      take();
      const std::int32_t rhs = parse_mul();
      lhs = with_span(builder_->binary(k, lhs, rhs), b, span_end(rhs));
    }
    return lhs;
  }

  std::int32_t parse_mul() {
    std::int32_t lhs = parse_unary();
    while (at(Tok::kStar) || at(Tok::kSlash)) {
      const NodeKind k = at(Tok::kStar) ? NodeKind::kMul : NodeKind::kDiv;
      const std::uint32_t b = span_begin(lhs);
      take();
      const std::int32_t rhs = parse_unary();
      lhs = with_span(builder_->binary(k, lhs, rhs), b, span_end(rhs));
    }
    return lhs;
  }

  std::int32_t parse_unary() {
    if (at(Tok::kMinus)) {
      const Token t = take();
      const std::int32_t child = parse_unary();
      return with_span(builder_->unary(NodeKind::kNeg, child), t.span.begin,
                       span_end(child));
    }
    return parse_pow();
  }

  std::int32_t parse_pow() {
    const std::int32_t base = parse_primary();
    if (!at(Tok::kCaret)) return base;
    const std::uint32_t b = span_begin(base);
    take();
    // Right-associative; exponent may carry a sign: x ^ -2.
    const std::int32_t expo = at(Tok::kMinus) ? parse_unary() : parse_pow();
    return with_span(builder_->binary(NodeKind::kPow, base, expo), b,
                     span_end(expo));
  }

  std::int32_t parse_primary() {
    const Token t = peek();
    switch (t.kind) {
      case Tok::kNumber: {
        take();
        return with_span(builder_->literal(t.number), t.span.begin,
                         t.span.end);
      }
      case Tok::kKwInf: {
        take();
        return with_span(builder_->literal(kInf), t.span.begin, t.span.end);
      }
      case Tok::kIdent: {
        take();
        return with_span(builder_->variable(t.text), t.span.begin, t.span.end);
      }
      case Tok::kLParen: {
        take();
        const std::int32_t inner = parse_or();
        const Token close = expect(Tok::kRParen);
        return with_span(inner, t.span.begin, close.span.end);
      }
      case Tok::kKwAbs:
      case Tok::kKwExp:
      case Tok::kKwFloor: {
        take();
        expect(Tok::kLParen);
        const std::int32_t arg = parse_or();
        const Token close = expect(Tok::kRParen);
        const NodeKind k = t.kind == Tok::kKwAbs   ? NodeKind::kAbs
                           : t.kind == Tok::kKwExp ? NodeKind::kExp
                                                   : NodeKind::kFloor;
        return with_span(builder_->unary(k, arg), t.span.begin, close.span.end);
      }
      case Tok::kKwMax:
      case Tok::kKwMin: {
        take();
        expect(Tok::kLParen);
        const std::int32_t a = parse_or();
        expect(Tok::kComma);
        const std::int32_t b = parse_or();
        const Token close = expect(Tok::kRParen);
        const NodeKind k =
            t.kind == Tok::kKwMax ? NodeKind::kMax : NodeKind::kMin;
        return with_span(builder_->binary(k, a, b), t.span.begin,
                         close.span.end);
      }
      case Tok::kKwCases:
        return parse_cases();
      default:
        fail_expected("a value");
    }
  }

  std::int32_t parse_cases() {
    const Token kw = expect(Tok::kKwCases);
    expect(Tok::kLBrace);
    std::vector<std::int32_t> pairs;
    std::int32_t else_value = -1;
    for (;;) {
      if (accept(Tok::kKwElse)) {
        expect(Tok::kArrow);
        else_value = parse_or();
        accept(Tok::kSemi);
        break;
      }
      if (pairs.empty() && at(Tok::kRBrace)) {
        fail_expected("a condition or 'else'");
      }
      const std::int32_t cond = parse_or();
      expect(Tok::kArrow);
      const std::int32_t value = parse_or();
      pairs.push_back(cond);
      pairs.push_back(value);
      expect(Tok::kSemi);
    }
    const Token close = expect(Tok::kRBrace);
    return with_span(builder_->cases(pairs, else_value), kw.span.begin,
                     close.span.end);
  }

  std::uint32_t span_begin(std::int32_t node) const;
  std::uint32_t span_end(std::int32_t node) const;

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  ExprBuilder* builder_ = nullptr;
};

}  // namespace

// ---------------------------------------------------------------------------
// ExprBuilder

std::int32_t ExprBuilder::literal(double v) {
  Node n;
  n.kind = NodeKind::kLiteral;
  n.literal = v;
  out_.nodes_.push_back(std::move(n));
  return static_cast<std::int32_t>(out_.nodes_.size() - 1);
}

std::int32_t ExprBuilder::variable(const std::string& name) {
  std::int32_t id = -1;
  for (std::size_t k = 0; k < out_.names_.size(); ++k) {
    if (out_.names_[k] == name) {
      id = static_cast<std::int32_t>(k);
      break;
    }
  }
  if (id < 0) {
    id = static_cast<std::int32_t>(out_.names_.size());
    out_.names_.push_back(name);
  }
  Node n;
  n.kind = NodeKind::kVariable;
  n.name = id;
  out_.nodes_.push_back(std::move(n));
  return static_cast<std::int32_t>(out_.nodes_.size() - 1);
}

std::int32_t ExprBuilder::unary(NodeKind k, std::int32_t a) {
  Node n;
  n.kind = k;
  n.a = a;
  out_.nodes_.push_back(std::move(n));
  return static_cast<std::int32_t>(out_.nodes_.size() - 1);
}

std::int32_t ExprBuilder::binary(NodeKind k, std::int32_t a, std::int32_t b) {
  Node n;
  n.kind = k;
  n.a = a;
  n.b = b;
  out_.nodes_.push_back(std::move(n));
  return static_cast<std::int32_t>(out_.nodes_.size() - 1);
}

std::int32_t ExprBuilder::cases(const std::vector<std::int32_t>& pairs,
                                std::int32_t else_value) {
  Node n;
  n.kind = NodeKind::kCases;
  n.parts = pairs;
  n.parts.push_back(else_value);
  out_.nodes_.push_back(std::move(n));
  return static_cast<std::int32_t>(out_.nodes_.size() - 1);
}

void ExprBuilder::set_span(std::int32_t node, SourceSpan span) {
  out_.nodes_[static_cast<std::size_t>(node)].span = span;
}

SourceSpan ExprBuilder::span_of(std::int32_t node) const {
  return out_.nodes_[static_cast<std::size_t>(node)].span;
}

Expr ExprBuilder::finish(std::int32_t root) && {
  out_.root_ = root;
  return std::move(out_);
}

namespace {
std::int32_t Parser::with_span(std::int32_t node, std::uint32_t begin,
                               std::uint32_t end) {
  builder_->set_span(node, {begin, end});
  return node;
}

std::uint32_t Parser::span_begin(std::int32_t node) const {
  return builder_->span_of(node).begin;
}

std::uint32_t Parser::span_end(std::int32_t node) const {
  return builder_->span_of(node).end;
}
}  // namespace

// ---------------------------------------------------------------------------
// Expr queries

bool Expr::uses(const std::string& name) const {
  std::int32_t id = -1;
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (names_[k] == name) {
      id = static_cast<std::int32_t>(k);
      break;
    }
  }
  if (id < 0) return false;
  for (const Node& n : nodes_) {
    if (n.kind == NodeKind::kVariable && n.name == id) return true;
  }
  return false;
}

namespace {
bool subtree_uses(const std::vector<Node>& nodes, std::int32_t at,
                  std::int32_t name_id) {
  const Node& n = nodes[static_cast<std::size_t>(at)];
  switch (n.kind) {
    case NodeKind::kLiteral: return false;
    case NodeKind::kVariable: return n.name == name_id;
    case NodeKind::kCases: {
      for (std::int32_t c : n.parts) {
        if (subtree_uses(nodes, c, name_id)) return true;
      }
      return false;
    }
    default:
      if (n.a >= 0 && subtree_uses(nodes, n.a, name_id)) return true;
      if (n.b >= 0 && subtree_uses(nodes, n.b, name_id)) return true;
      return false;
  }
}

std::int32_t copy_subtree(const Expr& src, std::int32_t at, ExprBuilder& b) {
  const Node& n = src.nodes()[static_cast<std::size_t>(at)];
  switch (n.kind) {
    case NodeKind::kLiteral:
      return b.literal(n.literal);
    case NodeKind::kVariable:
      return b.variable(src.names()[static_cast<std::size_t>(n.name)]);
    case NodeKind::kNeg:
    case NodeKind::kAbs:
    case NodeKind::kExp:
    case NodeKind::kFloor:
      return b.unary(n.kind, copy_subtree(src, n.a, b));
    case NodeKind::kCases: {
      std::vector<std::int32_t> pairs;
      for (std::size_t k = 0; k + 1 < n.parts.size(); ++k) {
        pairs.push_back(copy_subtree(src, n.parts[k], b));
      }
      const std::int32_t ev = copy_subtree(src, n.parts.back(), b);
      return b.cases(pairs, ev);
    }
    default: {
      const std::int32_t a = copy_subtree(src, n.a, b);
      const std::int32_t bb = copy_subtree(src, n.b, b);
      return b.binary(n.kind, a, bb);
    }
  }
}
}  // namespace

Expr Expr::subtree(std::int32_t node) const {
  ExprBuilder b;
  const std::int32_t root = copy_subtree(*this, node, b);
  return std::move(b).finish(root);
}

namespace {
bool same_node(const Expr& x, std::int32_t xi, const Expr& y, std::int32_t yi) {
  const Node& a = x.nodes()[static_cast<std::size_t>(xi)];
  const Node& b = y.nodes()[static_cast<std::size_t>(yi)];
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::kLiteral:
      return (a.literal == b.literal &&
              std::signbit(a.literal) == std::signbit(b.literal)) ||
             (std::isnan(a.literal) && std::isnan(b.literal));
    case NodeKind::kVariable:
      return x.names()[static_cast<std::size_t>(a.name)] ==
             y.names()[static_cast<std::size_t>(b.name)];
    case NodeKind::kCases: {
      if (a.parts.size() != b.parts.size()) return false;
      for (std::size_t k = 0; k < a.parts.size(); ++k) {
        if (!same_node(x, a.parts[k], y, b.parts[k])) return false;
      }
      return true;
    }
    default:
      if ((a.a >= 0) != (b.a >= 0) || (a.b >= 0) != (b.b >= 0)) return false;
      if (a.a >= 0 && !same_node(x, a.a, y, b.a)) return false;
      if (a.b >= 0 && !same_node(x, a.b, y, b.b)) return false;
      return true;
  }
}
}  // namespace

bool Expr::same_structure(const Expr& other) const {
  if (root_ < 0 || other.root_ < 0) return root_ == other.root_;
  return same_node(*this, root_, other, other.root_);
}

Expr Expr::parse(const std::string& source) { return Parser(source).run(); }

// ---------------------------------------------------------------------------
// Printing (canonical, minimal parentheses, structure-preserving)

namespace {

int precedence_of(NodeKind k) {
  switch (k) {
    case NodeKind::kOr: return 1;
    case NodeKind::kAnd: return 2;
    case NodeKind::kLess:
    case NodeKind::kLessEq:
    case NodeKind::kEq:
    case NodeKind::kGreaterEq:
    case NodeKind::kGreater: return 3;
    case NodeKind::kAdd:
    case NodeKind::kSub: return 4;
    case NodeKind::kMul:
    case NodeKind::kDiv: return 5;
    case NodeKind::kNeg: return 6;
    case NodeKind::kPow: return 7;
    default: return 8;
  }
}

const char* op_text(NodeKind k) {
  switch (k) {
    case NodeKind::kAdd: return " + ";
    case NodeKind::kSub: return " - ";
    case NodeKind::kMul: return " * ";
    case NodeKind::kDiv: return " / ";
    case NodeKind::kPow: return " ^ ";
    case NodeKind::kLess: return " < ";
    case NodeKind::kLessEq: return " <= ";
    case NodeKind::kEq: return " = ";
    case NodeKind::kGreaterEq: return " >= ";
    case NodeKind::kGreater: return " > ";
    case NodeKind::kAnd: return " and ";
    case NodeKind::kOr: return " or ";
    default: return " ? ";
  }
}

void print_node(const Expr& e, std::int32_t at, int parent_level,
                bool strict, std::string& out) {
  const Node& n = e.nodes()[static_cast<std::size_t>(at)];
  const int level = precedence_of(n.kind);
  const bool parens = strict ? level <= parent_level : level < parent_level;
  if (parens) out += '(';
  switch (n.kind) {
    case NodeKind::kLiteral:
      if (n.literal < 0 || (n.literal == 0 && std::signbit(n.literal))) {
        // Negative literals only arise from programmatic construction;
        // print through unary minus so the text re-parses identically.
        out += '-';
        out += format_shortest(-n.literal);
      } else {
        out += format_shortest(n.literal);
      }
      break;
    case NodeKind::kVariable:
      out += e.names()[static_cast<std::size_t>(n.name)];
      break;
    case NodeKind::kNeg:
      out += '-';
      print_node(e, n.a, level, true, out);
      break;
    case NodeKind::kAbs:
    case NodeKind::kExp:
    case NodeKind::kFloor:
      out += n.kind == NodeKind::kAbs   ? "abs("
             : n.kind == NodeKind::kExp ? "exp("
                                        : "floor(";
      print_node(e, n.a, 0, false, out);
      out += ')';
      break;
    case NodeKind::kMax:
    case NodeKind::kMin:
      out += n.kind == NodeKind::kMax ? "max(" : "min(";
      print_node(e, n.a, 0, false, out);
      out += ", ";
      print_node(e, n.b, 0, false, out);
      out += ')';
      break;
    case NodeKind::kCases: {
      out += "cases { ";
      const std::size_t pairs = (n.parts.size() - 1) / 2;
      for (std::size_t k = 0; k < pairs; ++k) {
        print_node(e, n.parts[2 * k], 0, false, out);
        out += " -> ";
        print_node(e, n.parts[2 * k + 1], 0, false, out);
        out += "; ";
      }
      out += "else -> ";
      print_node(e, n.parts.back(), 0, false, out);
      out += " }";
      break;
    }
    case NodeKind::kPow:
      // Right-associative: parenthesize an exponent-shaped left child.
      print_node(e, n.a, level, true, out);
      out += op_text(n.kind);
      print_node(e, n.b, level - 1, true, out);
      break;
    case NodeKind::kLess:
    case NodeKind::kLessEq:
    case NodeKind::kEq:
    case NodeKind::kGreaterEq:
    case NodeKind::kGreater:
      // Non-associative: a nested comparison (programmatic only) must keep
      // its parentheses, or the text would read as a rejected chain.
      print_node(e, n.a, level, true, out);
      out += op_text(n.kind);
      print_node(e, n.b, level, true, out);
      break;
    default:
      // Left-associative binary: the right child needs parentheses at the
      // same level so a - (b - c) and (a - b) - c stay distinct.
      print_node(e, n.a, level - 1, true, out);
      out += op_text(n.kind);
      print_node(e, n.b, level, true, out);
      break;
  }
  if (parens) out += ')';
}

}  // namespace

std::string Expr::to_string() const {
  if (root_ < 0) return "";
  std::string out;
  print_node(*this, root_, 0, false, out);
  return out;
}

// ---------------------------------------------------------------------------
// BoundExpr

BoundExpr::BoundExpr(const Expr* e, const std::vector<std::string>& env)
    : expr_(e) {
  slots_.resize(e->names().size(), -1);
  for (std::size_t k = 0; k < e->names().size(); ++k) {
    for (std::size_t s = 0; s < env.size(); ++s) {
      if (env[s] == e->names()[k]) {
        slots_[k] = static_cast<std::int32_t>(s);
        break;
      }
    }
    if (slots_[k] < 0) throw BindError(e->names()[k]);
  }
}

double BoundExpr::evaluate(std::span<const double> slots) const {
  return eval(expr_->root(), slots, -1, Side::kExact);
}

double BoundExpr::evaluate_limit(std::span<const double> slots,
                                 std::int32_t limit_slot, Side side) const {
  return eval(expr_->root(), slots, side == Side::kExact ? -1 : limit_slot,
              side);
}

double BoundExpr::evaluate_node(std::int32_t node,
                                std::span<const double> slots) const {
  return eval(node, slots, -1, Side::kExact);
}

namespace {
[[noreturn]] void eval_fail(const char* message, const Node& n) {
  throw EvalError(message, n.span.begin, n.span.end);
}

// Resolve `var cmp bound` when the bare variable equals the bound but is
// displaced infinitesimally. var_sign is -1 below / +1 above the stored
// value; flip it when the variable sits on the right of the comparison.
double limit_compare(NodeKind k, int var_sign) {
  switch (k) {
    case NodeKind::kLess:
    case NodeKind::kLessEq:
      return var_sign < 0 ? 1.0 : 0.0;
    case NodeKind::kGreater:
    case NodeKind::kGreaterEq:
      return var_sign > 0 ? 1.0 : 0.0;
    case NodeKind::kEq:
    default:
      return 0.0;
  }
}
}  // namespace

double BoundExpr::eval(std::int32_t at, std::span<const double> slots,
                       std::int32_t limit_slot, Side side) const {
  const Node& n = expr_->nodes()[static_cast<std::size_t>(at)];
  switch (n.kind) {
    case NodeKind::kLiteral:
      return n.literal;
    case NodeKind::kVariable:
      return slots[static_cast<std::size_t>(
          slots_[static_cast<std::size_t>(n.name)])];
    case NodeKind::kNeg:
      return -eval(n.a, slots, limit_slot, side);
    case NodeKind::kAbs:
      return std::fabs(eval(n.a, slots, limit_slot, side));
    case NodeKind::kExp:
      return std::exp(eval(n.a, slots, limit_slot, side));
    case NodeKind::kFloor: {
      // A value displaced infinitesimally below an integer floors one lower.
      const double v = eval(n.a, slots, limit_slot, side);
      if (limit_slot >= 0 && side == Side::kBelow &&
          n.a >= 0 &&
          expr_->nodes()[static_cast<std::size_t>(n.a)].kind ==
              NodeKind::kVariable &&
          slots_[static_cast<std::size_t>(
              expr_->nodes()[static_cast<std::size_t>(n.a)].name)] ==
              limit_slot &&
          std::floor(v) == v && std::isfinite(v)) {
        return v - 1.0;
      }
      return std::floor(v);
    }
    case NodeKind::kAdd:
    case NodeKind::kSub:
    case NodeKind::kMul:
    case NodeKind::kDiv:
    case NodeKind::kPow:
    case NodeKind::kMax:
    case NodeKind::kMin: {
      const double a = eval(n.a, slots, limit_slot, side);
      const double b = eval(n.b, slots, limit_slot, side);
      if (std::isnan(a) || std::isnan(b)) eval_fail("undefined value", n);
      double r = 0.0;
      switch (n.kind) {
        case NodeKind::kAdd: r = a + b; break;
        case NodeKind::kSub: r = a - b; break;
        case NodeKind::kMul: r = a * b; break;
        case NodeKind::kDiv:
          if (b == 0.0) eval_fail("division by zero", n);
          r = a / b;
          break;
        case NodeKind::kPow: r = std::pow(a, b); break;
        case NodeKind::kMax: r = a < b ? b : a; break;
        case NodeKind::kMin: r = b < a ? b : a; break;
        default: break;
      }
      if (std::isnan(r)) eval_fail("undefined value", n);
      return r;
    }
    case NodeKind::kLess:
    case NodeKind::kLessEq:
    case NodeKind::kEq:
    case NodeKind::kGreaterEq:
    case NodeKind::kGreater: {
      const auto& nodes = expr_->nodes();
      if (limit_slot >= 0) {
        const Node& lhs = nodes[static_cast<std::size_t>(n.a)];
        const Node& rhs = nodes[static_cast<std::size_t>(n.b)];
        const bool lhs_is_var =
            lhs.kind == NodeKind::kVariable &&
            slots_[static_cast<std::size_t>(lhs.name)] == limit_slot;
        const bool rhs_is_var =
            rhs.kind == NodeKind::kVariable &&
            slots_[static_cast<std::size_t>(rhs.name)] == limit_slot;
        const int var_sign = side == Side::kBelow ? -1 : 1;
        if (lhs_is_var && !rhs_is_var) {
          const double bound = eval(n.b, slots, limit_slot, side);
          const double v = slots[static_cast<std::size_t>(limit_slot)];
          if (std::isnan(bound)) eval_fail("undefined value", n);
          if (v == bound) return limit_compare(n.kind, var_sign);
        } else if (rhs_is_var && !lhs_is_var) {
          const double bound = eval(n.a, slots, limit_slot, side);
          const double v = slots[static_cast<std::size_t>(limit_slot)];
          if (std::isnan(bound)) eval_fail("undefined value", n);
          // bound cmp var: displacing the variable flips the effective side.
          NodeKind flipped;
          switch (n.kind) {
            case NodeKind::kLess: flipped = NodeKind::kGreater; break;
            case NodeKind::kLessEq: flipped = NodeKind::kGreaterEq; break;
            case NodeKind::kGreaterEq: flipped = NodeKind::kLessEq; break;
            case NodeKind::kGreater: flipped = NodeKind::kLess; break;
            default: flipped = NodeKind::kEq; break;
          }
          if (v == bound) return limit_compare(flipped, var_sign);
        }
      }
      const double a = eval(n.a, slots, limit_slot, side);
      const double b = eval(n.b, slots, limit_slot, side);
      if (std::isnan(a) || std::isnan(b)) eval_fail("undefined value", n);
      switch (n.kind) {
        case NodeKind::kLess: return a < b ? 1.0 : 0.0;
        case NodeKind::kLessEq: return a <= b ? 1.0 : 0.0;
        case NodeKind::kEq: return a == b ? 1.0 : 0.0;
        case NodeKind::kGreaterEq: return a >= b ? 1.0 : 0.0;
        default: return a > b ? 1.0 : 0.0;
      }
    }
    case NodeKind::kAnd: {
      const double a = eval(n.a, slots, limit_slot, side);
      if (a == 0.0) return 0.0;
      return eval(n.b, slots, limit_slot, side) != 0.0 ? 1.0 : 0.0;
    }
    case NodeKind::kOr: {
      const double a = eval(n.a, slots, limit_slot, side);
      if (a != 0.0) return 1.0;
      return eval(n.b, slots, limit_slot, side) != 0.0 ? 1.0 : 0.0;
    }
    case NodeKind::kCases: {
      const std::size_t pairs = (n.parts.size() - 1) / 2;
      for (std::size_t k = 0; k < pairs; ++k) {
        if (eval(n.parts[2 * k], slots, limit_slot, side) != 0.0) {
          return eval(n.parts[2 * k + 1], slots, limit_slot, side);
        }
      }
      return eval(n.parts.back(), slots, limit_slot, side);
    }
  }
  return 0.0;  // unreachable
}

// ---------------------------------------------------------------------------
// Threshold extraction

std::vector<Threshold> thresholds(const Expr& e) {
  std::vector<Threshold> out;
  for (std::size_t i = 0; i < e.nodes().size(); ++i) {
    const Node& n = e.nodes()[i];
    switch (n.kind) {
      case NodeKind::kLess:
      case NodeKind::kLessEq:
      case NodeKind::kEq:
      case NodeKind::kGreaterEq:
      case NodeKind::kGreater: {
        const Node& a = e.nodes()[static_cast<std::size_t>(n.a)];
        const Node& b = e.nodes()[static_cast<std::size_t>(n.b)];
        if (a.kind == NodeKind::kVariable &&
            !subtree_uses(e.nodes(), n.b, a.name)) {
          out.push_back(
              {e.names()[static_cast<std::size_t>(a.name)], n.b});
        }
        if (b.kind == NodeKind::kVariable &&
            !subtree_uses(e.nodes(), n.a, b.name)) {
          out.push_back(
              {e.names()[static_cast<std::size_t>(b.name)], n.a});
        }
        break;
      }
      default: break;
    }
  }
  return out;
}

}  // namespace bilevel
