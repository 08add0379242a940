// SPDX-License-Identifier: Apache-2.0
//
// Sets of reals represented exactly as finite unions of intervals over the
// extended real line. Every set is stored canonically: pieces are sorted,
// pairwise disjoint, and non-adjacent (no further merging is possible), with
// per-endpoint closure flags. Degenerate points are one-point intervals with
// both endpoints closed; infinite endpoints are always open. All endpoint
// comparisons are exact double comparisons -- any tolerance belongs to the
// solvers that construct these sets, never to the set algebra itself.
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bilevel/errors.hpp"

namespace bilevel {

struct Endpoint {
  double value = 0.0;
  bool closed = false;  // value belongs to the set; never true for +-inf

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct Interval {
  Endpoint lo, hi;

  friend bool operator==(const Interval&, const Interval&) = default;
};

// An extremum of a set together with whether the set attains it.
struct Extremum {
  double value = 0.0;
  bool attained = false;

  friend bool operator==(const Extremum&, const Extremum&) = default;
};

// Verdict of comparing two sets under both set orders at once.
struct OrderVerdict {
  bool leq_l = false;
  bool leq_u = false;
};

// Canonical finite union of intervals. Always nonempty.
class RealSet {
 public:
  // Canonicalizes arbitrary interval input: validates each piece, drops
  // degenerate-empty ones ([a,a) style), sorts, merges overlaps and
  // touching pieces. Throws EmptySetError when nothing remains and
  // SetFormError on malformed pieces (lo > hi, closed infinity, NaN).
  static RealSet canonicalize(std::vector<Interval> pieces);

  static RealSet point(double v);
  static RealSet interval(double lo, bool lo_closed, double hi, bool hi_closed);

  // Grammar: pieces separated by 'u'; "[0,1)", "(3,inf)", "{2}".
  // parse(print(A)) == A exactly.
  static RealSet parse(const std::string& text);
  std::string to_string() const;

  const std::vector<Interval>& pieces() const { return pieces_; }
  Extremum inf() const;
  Extremum sup() const;
  bool contains(double v) const;
  // Shortest distance from v to the set's closure (0 when contained).
  double distance(double v) const;
  // True when the set is closed in R: every finite endpoint is attained.
  bool closed_in_reals() const;

  friend bool operator==(const RealSet&, const RealSet&) = default;

 private:
  explicit RealSet(std::vector<Interval> pieces) : pieces_(std::move(pieces)) {}
  std::vector<Interval> pieces_;
};

Extremum inf_of(const RealSet& a);
Extremum sup_of(const RealSet& a);

// Lower set order with cone [0,inf): A <= B iff A + [0,inf) contains B.
bool leq_l(const RealSet& a, const RealSet& b);
// Upper set order: A <= B iff B - [0,inf) contains A.
bool leq_u(const RealSet& a, const RealSet& b);
OrderVerdict compare(const RealSet& a, const RealSet& b);

// Elementwise negation {-a : a in A}.
RealSet negate(const RealSet& a);

// Indices i such that no family member strictly precedes member i:
// for all j, leq(family[j], family[i]) implies leq(family[i], family[j]).
// The order is a preorder, so "minimal" tolerates mutually-equivalent members.
std::vector<std::size_t> minimal_members(
    const std::vector<RealSet>& family,
    const std::function<bool(const RealSet&, const RealSet&)>& leq);

}  // namespace bilevel
