// SPDX-License-Identifier: Apache-2.0
#include "bilevel/setreal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "bilevel/numfmt.hpp"

namespace bilevel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_piece(const Interval& iv) {
  if (std::isnan(iv.lo.value) || std::isnan(iv.hi.value)) {
    throw SetFormError("interval endpoint is NaN");
  }
  if (std::isinf(iv.lo.value) && iv.lo.closed) {
    throw SetFormError("infinite endpoint cannot be closed");
  }
  if (std::isinf(iv.hi.value) && iv.hi.closed) {
    throw SetFormError("infinite endpoint cannot be closed");
  }
  if (iv.lo.value > iv.hi.value) {
    throw SetFormError("interval lower endpoint exceeds upper endpoint");
  }
  if (iv.lo.value == kInf || iv.hi.value == -kInf) {
    throw SetFormError("interval lies outside the reals");
  }
}

// True when the two canonical-ordered pieces overlap or touch in a way that
// merging them loses no endpoint information ([0,1) next to [1,2] merges;
// [0,1) next to (1,2] does not -- the point 1 is missing).
bool can_merge(const Interval& a, const Interval& b) {
  if (b.lo.value < a.hi.value) return true;
  if (b.lo.value > a.hi.value) return false;
  return a.hi.closed || b.lo.closed;
}

double normalize_zero(double v) { return v == 0.0 ? 0.0 : v; }

}  // namespace

RealSet RealSet::canonicalize(std::vector<Interval> input) {
  std::vector<Interval> pieces;
  pieces.reserve(input.size());
  for (Interval iv : input) {
    validate_piece(iv);
    if (iv.lo.value == iv.hi.value && !(iv.lo.closed && iv.hi.closed)) {
      continue;  // [a,a) and (a,a] and (a,a) denote the empty set
    }
    iv.lo.value = normalize_zero(iv.lo.value);
    iv.hi.value = normalize_zero(iv.hi.value);
    pieces.push_back(iv);
  }
  if (pieces.empty()) {
    throw EmptySetError("canonicalize: set has no points");
  }
  std::sort(pieces.begin(), pieces.end(), [](const Interval& a, const Interval& b) {
    if (a.lo.value != b.lo.value) return a.lo.value < b.lo.value;
    if (a.lo.closed != b.lo.closed) return a.lo.closed;  // closed start first
    if (a.hi.value != b.hi.value) return a.hi.value < b.hi.value;
    return b.hi.closed && !a.hi.closed;
  });
  std::vector<Interval> merged;
  merged.push_back(pieces.front());
  for (std::size_t i = 1; i < pieces.size(); ++i) {
    Interval& cur = merged.back();
    const Interval& nxt = pieces[i];
    if (can_merge(cur, nxt)) {
      if (nxt.hi.value > cur.hi.value) {
        cur.hi = nxt.hi;
      } else if (nxt.hi.value == cur.hi.value) {
        cur.hi.closed = cur.hi.closed || nxt.hi.closed;
      }
    } else {
      merged.push_back(nxt);
    }
  }
  return RealSet(std::move(merged));
}

RealSet RealSet::point(double v) {
  return canonicalize({Interval{{v, true}, {v, true}}});
}

RealSet RealSet::interval(double lo, bool lo_closed, double hi, bool hi_closed) {
  return canonicalize({Interval{{lo, lo_closed}, {hi, hi_closed}}});
}

Extremum RealSet::inf() const {
  const Endpoint& e = pieces_.front().lo;
  return {e.value, e.closed};
}

Extremum RealSet::sup() const {
  const Endpoint& e = pieces_.back().hi;
  return {e.value, e.closed};
}

bool RealSet::contains(double v) const {
  for (const Interval& iv : pieces_) {
    if (v < iv.lo.value) return false;
    if (v == iv.lo.value) return iv.lo.closed;
    if (v < iv.hi.value) return true;
    if (v == iv.hi.value) return iv.hi.closed;
  }
  return false;
}

double RealSet::distance(double v) const {
  double best = kInf;
  for (const Interval& iv : pieces_) {
    double d;
    if (v < iv.lo.value) {
      d = iv.lo.value - v;
    } else if (v > iv.hi.value) {
      d = v - iv.hi.value;
    } else {
      return 0.0;
    }
    best = std::min(best, d);
  }
  return best;
}

bool RealSet::closed_in_reals() const {
  for (const Interval& iv : pieces_) {
    if (std::isfinite(iv.lo.value) && !iv.lo.closed) return false;
    if (std::isfinite(iv.hi.value) && !iv.hi.closed) return false;
  }
  return true;
}

Extremum inf_of(const RealSet& a) { return a.inf(); }
Extremum sup_of(const RealSet& a) { return a.sup(); }

// A + [0,inf) is the half-line starting at inf(A), closed exactly when A
// attains its infimum. It contains B iff B starts no earlier, with the tie
// decided by attainment.
bool leq_l(const RealSet& a, const RealSet& b) {
  Extremum ia = a.inf(), ib = b.inf();
  if (ia.value != ib.value) return ia.value < ib.value;
  return ia.attained || !ib.attained;
}

// Mirror image at the supremum: B - [0,inf) contains A.
bool leq_u(const RealSet& a, const RealSet& b) {
  Extremum sa = a.sup(), sb = b.sup();
  if (sa.value != sb.value) return sa.value < sb.value;
  return sb.attained || !sa.attained;
}

OrderVerdict compare(const RealSet& a, const RealSet& b) {
  return {leq_l(a, b), leq_u(a, b)};
}

RealSet negate(const RealSet& a) {
  std::vector<Interval> flipped;
  flipped.reserve(a.pieces().size());
  for (auto it = a.pieces().rbegin(); it != a.pieces().rend(); ++it) {
    flipped.push_back(Interval{{-it->hi.value, it->hi.closed},
                               {-it->lo.value, it->lo.closed}});
  }
  return RealSet::canonicalize(std::move(flipped));
}

std::vector<std::size_t> minimal_members(
    const std::vector<RealSet>& family,
    const std::function<bool(const RealSet&, const RealSet&)>& leq) {
  std::vector<std::size_t> result;
  for (std::size_t i = 0; i < family.size(); ++i) {
    bool minimal = true;
    for (std::size_t j = 0; j < family.size(); ++j) {
      if (j == i) continue;
      if (leq(family[j], family[i]) && !leq(family[i], family[j])) {
        minimal = false;
        break;
      }
    }
    if (minimal) result.push_back(i);
  }
  return result;
}

// ------------------------------------------------------------- printing ----

std::string RealSet::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (i) out += " u ";
    const Interval& iv = pieces_[i];
    if (iv.lo.value == iv.hi.value) {
      out += "{" + format_shortest(iv.lo.value) + "}";
    } else {
      out += iv.lo.closed ? '[' : '(';
      out += format_shortest(iv.lo.value);
      out += ',';
      out += format_shortest(iv.hi.value);
      out += iv.hi.closed ? ']' : ')';
    }
  }
  return out;
}

// -------------------------------------------------------------- parsing ----

namespace {

struct SetCursor {
  const std::string& text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  [[noreturn]] void fail(const std::string& message, const std::string& expected) {
    throw ParseError("set literal: " + message, pos,
                     std::min(pos + 1, text.size()), expected);
  }

  double number() {
    skip_ws();
    std::size_t start = pos;
    if (text.compare(pos, 4, "-inf") == 0) {
      pos += 4;
      return -kInf;
    }
    if (text.compare(pos, 3, "inf") == 0) {
      pos += 3;
      return kInf;
    }
    double value = 0.0;
    auto res = std::from_chars(text.data() + pos, text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr == text.data() + pos) {
      fail("expected a number", "number, 'inf', '-inf'");
    }
    pos = static_cast<std::size_t>(res.ptr - text.data());
    if (std::isnan(value)) {
      throw ParseError("set literal: NaN endpoint", start, pos, "finite number");
    }
    return value;
  }

  void expect(char c, const std::string& what) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c) fail("expected '" + std::string(1, c) + "'", what);
    ++pos;
  }
};

}  // namespace

RealSet RealSet::parse(const std::string& text) {
  SetCursor cur{text};
  std::vector<Interval> pieces;
  while (true) {
    char c = cur.peek();
    if (c == '{') {
      ++cur.pos;
      double v = cur.number();
      cur.expect('}', "'}'");
      pieces.push_back(Interval{{v, true}, {v, true}});
    } else if (c == '[' || c == '(') {
      bool lo_closed = c == '[';
      ++cur.pos;
      double lo = cur.number();
      cur.expect(',', "','");
      double hi = cur.number();
      char closer = cur.peek();
      if (closer != ']' && closer != ')') cur.fail("expected ']' or ')'", "']', ')'");
      ++cur.pos;
      pieces.push_back(Interval{{lo, lo_closed}, {hi, closer == ']'}});
    } else {
      cur.fail("expected an interval or point", "'[', '(', '{'");
    }
    if (cur.at_end()) break;
    cur.skip_ws();
    if (cur.text[cur.pos] != 'u') cur.fail("expected 'u' between pieces", "'u'");
    ++cur.pos;
  }
  return canonicalize(std::move(pieces));
}

}  // namespace bilevel
