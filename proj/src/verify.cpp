// SPDX-License-Identifier: Apache-2.0
#include "bilevel/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bilevel/errors.hpp"
#include "bilevel/games.hpp"
#include "bilevel/numfmt.hpp"
#include "bilevel/robust.hpp"

namespace bilevel {
namespace {

std::string xlabel(const FamilyResult& fam, std::size_t i) {
  return point_label(fam.grid[i]);
}

std::string pair_label(const FamilyResult& fam, const PairMember& m) {
  if (m.y.empty())
    return xlabel(fam, m.index) + " with value " + format_shortest(m.value);
  return xlabel(fam, m.index) + " -> " + point_label(m.y);
}

bool in_global(const std::vector<std::size_t>& v, std::size_t i) {
  return std::find(v.begin(), v.end(), i) != v.end();
}

bool in_local(const std::vector<LocalX>& v, std::size_t i) {
  return std::any_of(v.begin(), v.end(),
                     [i](const LocalX& l) { return l.index == i; });
}

bool has_global_pair(const std::vector<PairMember>& v, std::size_t i,
                     double value) {
  return std::any_of(v.begin(), v.end(), [&](const PairMember& m) {
    return m.index == i && m.value == value;
  });
}

bool has_local_pair(const std::vector<LocalPair>& v, std::size_t i,
                    double value) {
  return std::any_of(v.begin(), v.end(), [&](const LocalPair& l) {
    return l.member.index == i && l.member.value == value;
  });
}

std::string count_note(std::size_t n, const std::string& what) {
  return "checked " + std::to_string(n) + " " + what;
}

void close_claim(ClaimResult& c, std::size_t checked,
                 const std::string& empty_note) {
  if (checked == 0 && c.violations.empty() && c.hypothesis == "holds") {
    c.hypothesis = "not-applicable";
    c.conclusion = "skipped";
    c.witnesses.push_back(empty_note);
    return;
  }
  c.conclusion = c.violations.empty() ? "pass" : "fail";
}

// Is the recorded best response at this point the unique minimizer of the
// leader objective over the whole response set?
bool unique_value_minimizer(const PsiResult& r) {
  if (!r.inf_F.attained) return false;
  const double v = r.inf_F.value;
  if (!r.pieces.empty()) {
    std::vector<double> attainers;
    for (const MonotonePiece& p : r.pieces) {
      if (p.shape == MonotonePiece::Shape::kConstant && p.y_lo < p.y_hi &&
          p.value_lo == v)
        return false;  // a whole stretch sits at the minimum
      if (p.lo_closed && p.value_lo == v) attainers.push_back(p.y_lo);
      if (p.hi_closed && p.value_hi == v) attainers.push_back(p.y_hi);
    }
    std::sort(attainers.begin(), attainers.end());
    attainers.erase(std::unique(attainers.begin(), attainers.end()),
                    attainers.end());
    return attainers.size() == 1;
  }
  std::size_t hits = 0;
  for (double pv : r.psi_values)
    if (pv == v) ++hits;
  return hits == 1;
}

struct Ctx {
  const BilevelInstance& inst;
  const FamilyResult& fam;
  const SolutionsReport& sol;
};

// Every minimal pair over the response graph projects to a leader point
// minimizing the optimistic value, and its value is that attained optimum.
ClaimResult claim_standard_implies_optimistic(const Ctx& c) {
  ClaimResult r{"standard-global-implies-real-optimistic", "holds", "", {}, {}};
  const auto& pairs = c.sol.standard_optimistic.global;
  for (const PairMember& m : pairs) {
    const PsiResult& pr = c.fam.results[m.index];
    if (!in_global(c.sol.real_optimistic.global, m.index))
      r.violations.push_back(pair_label(c.fam, m) +
                             " is a minimal pair but its leader point does not "
                             "minimize the optimistic value");
    if (!pr.inf_F.attained || m.value != pr.inf_F.value)
      r.violations.push_back(pair_label(c.fam, m) +
                             " does not realize the attained optimistic value "
                             "at its leader point");
  }
  r.witnesses.push_back(count_note(pairs.size(), "minimal pairs"));
  close_claim(r, pairs.size(), "no minimal pairs over the response graph");
  return r;
}

// Every minimal pair's leader point has a minimal image in the lower set
// order, and the pair's value reappears as a set-valued optimum.
ClaimResult claim_standard_implies_l_and_vector(const Ctx& c) {
  ClaimResult r{"standard-global-implies-l-minimal-and-vector", "holds", "",
                {}, {}};
  const auto& pairs = c.sol.standard_optimistic.global;
  for (const PairMember& m : pairs) {
    if (!in_global(c.sol.l_minimal.global, m.index))
      r.violations.push_back(pair_label(c.fam, m) +
                             " is a minimal pair but its image is not minimal "
                             "in the lower set order");
    bool found = std::any_of(
        c.sol.vector_optimal.global.begin(), c.sol.vector_optimal.global.end(),
        [&](const PairMember& v) {
          return v.index == m.index && v.value == m.value;
        });
    if (!found)
      r.violations.push_back(pair_label(c.fam, m) +
                             " is a minimal pair but its value is not a "
                             "set-valued optimum at that leader point");
  }
  r.witnesses.push_back(count_note(pairs.size(), "minimal pairs"));
  close_claim(r, pairs.size(), "no minimal pairs over the response graph");
  return r;
}

// A leader point that minimizes the optimistic value and attains it yields a
// minimal pair with the attaining response.
ClaimResult claim_attained_optimistic_implies_standard(const Ctx& c) {
  ClaimResult r{"attained-optimistic-implies-standard-pair", "holds", "", {},
                {}};
  std::size_t checked = 0;
  for (std::size_t i : c.sol.real_optimistic.global) {
    const PsiResult& pr = c.fam.results[i];
    if (!pr.inf_F.attained) continue;
    ++checked;
    if (!has_global_pair(c.sol.standard_optimistic.global, i, pr.inf_F.value))
      r.violations.push_back(
          xlabel(c.fam, i) +
          " attains the minimal optimistic value but no minimal pair sits "
          "over it");
  }
  r.witnesses.push_back(count_note(checked, "attained optimistic minimizers"));
  close_claim(r, checked, "no optimistic minimizer attains its value");
  return r;
}

// Local version of the previous claim, at the instance's radius schedule.
ClaimResult claim_attained_local_optimistic_implies_local_standard(
    const Ctx& c) {
  ClaimResult r{"attained-local-optimistic-implies-local-standard-pair",
                "holds", "", {}, {}};
  std::size_t checked = 0;
  for (const LocalX& lx : c.sol.real_optimistic.local) {
    const PsiResult& pr = c.fam.results[lx.index];
    if (!pr.inf_F.attained) continue;
    ++checked;
    if (!has_local_pair(c.sol.standard_optimistic.local, lx.index,
                        pr.inf_F.value))
      r.violations.push_back(
          xlabel(c.fam, lx.index) +
          " is a local optimistic minimizer attaining its value, but no "
          "local minimal pair sits over it");
  }
  r.witnesses.push_back(
      count_note(checked, "attained local optimistic minimizers"));
  close_claim(r, checked, "no local optimistic minimizer attains its value");
  return r;
}

// Infimum distance from y to the responses attaining the competitor's
// optimistic value; nullopt when that value is unattained.
std::optional<double> attainer_distance(const PsiResult& r,
                                        const std::vector<double>& y) {
  if (!r.inf_F.attained) return std::nullopt;
  const double v = r.inf_F.value;
  double best = std::numeric_limits<double>::infinity();
  if (!r.pieces.empty()) {
    const double y0 = y[0];
    for (const MonotonePiece& p : r.pieces) {
      if (p.shape == MonotonePiece::Shape::kConstant && p.value_lo == v) {
        best = std::min(best, std::max({p.y_lo - y0, y0 - p.y_hi, 0.0}));
        continue;
      }
      if (p.lo_closed && p.value_lo == v)
        best = std::min(best, std::abs(y0 - p.y_lo));
      if (p.hi_closed && p.value_hi == v)
        best = std::min(best, std::abs(y0 - p.y_hi));
    }
  } else {
    for (std::size_t k = 0; k < r.psi_points.size(); ++k)
      if (r.psi_values[k] == v)
        best = std::min(best, space_norm(r.psi_points[k], y));
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

// A local minimal pair whose response is the unique value minimizer at its
// leader point forces the point to be a local optimistic minimizer -- at the
// same radius, once every competitor in the ball reaches its optimistic
// value inside the pair ball. That locality condition is the finite stand-in
// for the solution map clustering at the response, and it is decided from
// the solved lower level rather than taken on trust.
ClaimResult claim_strict_minimizer_bridge(const Ctx& c) {
  ClaimResult r{"strict-minimizer-bridges-local-standard-to-local-optimistic",
                "holds", "", {}, {}};
  std::size_t checked = 0;
  for (const LocalPair& lp : c.sol.standard_optimistic.local) {
    const PsiResult& pr = c.fam.results[lp.member.index];
    if (lp.member.value != pr.inf_F.value || !unique_value_minimizer(pr)) {
      r.witnesses.push_back("hypothesis fails at " +
                            pair_label(c.fam, lp.member) +
                            ": the response is not the unique value minimizer");
      continue;
    }
    const double eps = lp.radius;
    bool stable = true;
    for (std::size_t j = 0; j < c.fam.grid.size() && stable; ++j) {
      const double d = space_norm(c.fam.grid[j], c.fam.grid[lp.member.index]);
      if (d >= eps) continue;
      const auto ad = attainer_distance(c.fam.results[j], lp.member.y);
      if (!ad || !(d + *ad < eps)) {
        stable = false;
        r.witnesses.push_back("hypothesis fails at " +
                              pair_label(c.fam, lp.member) + ": competitor " +
                              xlabel(c.fam, j) +
                              " reaches its optimistic value only outside "
                              "the pair ball");
      }
    }
    if (!stable) continue;
    ++checked;
    if (!in_local(c.sol.real_optimistic.local, lp.member.index))
      r.violations.push_back(
          pair_label(c.fam, lp.member) +
          " is a local minimal pair with a unique value minimizer reached by "
          "every neighbor, but its leader point is not a local optimistic "
          "minimizer");
  }
  r.witnesses.push_back(
      count_note(checked, "local minimal pairs with unique value minimizers"));
  close_claim(r, checked, "no local minimal pairs to check");
  return r;
}

// Lower-order minimality forces optimistic-value minimality, globally and
// locally; dually for the upper order and the pessimistic value.
ClaimResult claim_order_implies_value(const Ctx& c, bool lower) {
  ClaimResult r{lower ? "l-minimal-implies-real-optimistic"
                      : "u-minimal-implies-real-pessimistic",
                "holds", "", {}, {}};
  const XConcept& order = lower ? c.sol.l_minimal : c.sol.u_minimal;
  const XConcept& value = lower ? c.sol.real_optimistic : c.sol.real_pessimistic;
  const char* order_name = lower ? "lower" : "upper";
  const char* value_name = lower ? "optimistic" : "pessimistic";
  for (std::size_t i : order.global)
    if (!in_global(value.global, i))
      r.violations.push_back(xlabel(c.fam, i) + " has a minimal image in the " +
                             order_name + " set order but does not minimize "
                             "the " + value_name + " value");
  for (const LocalX& lx : order.local)
    if (!in_local(value.local, lx.index))
      r.violations.push_back(xlabel(c.fam, lx.index) +
                             " is locally minimal in the " + order_name +
                             " set order but not a local " + value_name +
                             " minimizer");
  std::size_t n = order.global.size() + order.local.size();
  r.witnesses.push_back(count_note(order.global.size(), "global members") +
                        " and " + std::to_string(order.local.size()) +
                        " local members");
  close_claim(r, n, std::string("no members minimal in the ") + order_name +
                        " set order");
  return r;
}

// With every image closed, value minimality comes back around to set-order
// minimality. When some image is not closed the conclusion is skipped, but
// factual gaps are still recorded as notes (they are consistent, not wrong).
ClaimResult claim_closed_images_converse(const Ctx& c) {
  ClaimResult r{"closed-images-give-converse-minimality", "holds", "", {}, {}};
  bool closed = true;
  for (std::size_t i = 0; i < c.fam.results.size(); ++i) {
    const auto& img = c.fam.results[i].image;
    if (img && img->closed_in_reals()) continue;
    closed = false;
    r.witnesses.push_back(
        "hypothesis fails: image at " + xlabel(c.fam, i) +
        (img ? " = " + img->to_string() + " is not closed in the reals"
             : " is unavailable"));
    break;
  }
  auto note = [&](const std::string& text) {
    if (closed)
      r.violations.push_back(text);
    else
      r.witnesses.push_back("note: " + text +
                            " (no contradiction: the hypothesis is absent)");
  };
  for (std::size_t i : c.sol.real_optimistic.global)
    if (!in_global(c.sol.l_minimal.global, i))
      note(xlabel(c.fam, i) + " minimizes the optimistic value but is not "
           "minimal in the lower set order");
  for (const LocalX& lx : c.sol.real_optimistic.local)
    if (!in_local(c.sol.l_minimal.local, lx.index))
      note(xlabel(c.fam, lx.index) + " is a local optimistic minimizer but "
           "not locally minimal in the lower set order");
  for (std::size_t i : c.sol.real_pessimistic.global)
    if (!in_global(c.sol.u_minimal.global, i))
      note(xlabel(c.fam, i) + " minimizes the pessimistic value but is not "
           "minimal in the upper set order");
  for (const LocalX& lx : c.sol.real_pessimistic.local)
    if (!in_local(c.sol.u_minimal.local, lx.index))
      note(xlabel(c.fam, lx.index) + " is a local pessimistic minimizer but "
           "not locally minimal in the upper set order");
  if (!closed) {
    r.hypothesis = "fails";
    r.conclusion = "skipped";
    return r;
  }
  r.witnesses.push_back("all images closed in the reals");
  r.conclusion = r.violations.empty() ? "pass" : "fail";
  return r;
}

// A set-valued optimum certifies both an optimistic minimizer and a minimal
// pair realizing the same value, globally and locally.
ClaimResult claim_vector_implies_real_and_standard(const Ctx& c) {
  ClaimResult r{"vector-implies-real-optimistic-and-standard-pair", "holds",
                "", {}, {}};
  const PairConcept& vec = c.sol.vector_optimal;
  for (const PairMember& m : vec.global) {
    if (!in_global(c.sol.real_optimistic.global, m.index))
      r.violations.push_back(pair_label(c.fam, m) +
                             " is a set-valued optimum but its leader point "
                             "does not minimize the optimistic value");
    if (!has_global_pair(c.sol.standard_optimistic.global, m.index, m.value))
      r.violations.push_back(pair_label(c.fam, m) +
                             " is a set-valued optimum with no minimal pair "
                             "realizing its value");
  }
  for (const LocalPair& lm : vec.local) {
    if (!in_local(c.sol.real_optimistic.local, lm.member.index))
      r.violations.push_back(pair_label(c.fam, lm.member) +
                             " is a local set-valued optimum but its leader "
                             "point is not a local optimistic minimizer");
    if (!has_local_pair(c.sol.standard_optimistic.local, lm.member.index,
                        lm.member.value))
      r.violations.push_back(pair_label(c.fam, lm.member) +
                             " is a local set-valued optimum with no local "
                             "minimal pair realizing its value");
  }
  std::size_t n = vec.global.size() + vec.local.size();
  r.witnesses.push_back(count_note(vec.global.size(), "global members") +
                        " and " + std::to_string(vec.local.size()) +
                        " local members");
  close_claim(r, n, "no set-valued optima");
  return r;
}

std::vector<std::string> labels_of(const Ctx& c,
                                   const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(xlabel(c.fam, i));
  return out;
}

std::string join_labels(const std::vector<std::string>& v) {
  if (v.empty()) return "{}";
  std::string out = "{";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += v[i];
  }
  return out + "}";
}

// The set of lower-order minimal points equals the optimistic argmin when no
// minimizer attains its value, and exactly the attaining minimizers
// otherwise.
ClaimResult claim_optimistic_partition(const Ctx& c) {
  ClaimResult r{"optimistic-argmin-partition-by-attainment", "holds", "", {},
                {}};
  const auto& q = c.sol.attainment.q;
  const auto& t = c.sol.attainment.t;
  const std::vector<std::size_t>& expected = t.empty() ? q : t;
  r.witnesses.push_back(
      t.empty() ? "no optimistic minimizer attains its value: the minimal set "
                  "must equal the whole argmin"
                : "attaining minimizers exist: the minimal set must equal "
                  "exactly those");
  if (c.sol.l_minimal.global != expected)
    r.violations.push_back(
        "lower-order minimal set " +
        join_labels(labels_of(c, c.sol.l_minimal.global)) + " differs from " +
        join_labels(labels_of(c, expected)));
  close_claim(r, q.size(), "empty optimistic argmin");
  return r;
}

// Dually, the upper-order minimal points equal the pessimistic argmin minus
// its attaining members, unless that difference is empty.
ClaimResult claim_pessimistic_partition(const Ctx& c) {
  ClaimResult r{"pessimistic-argmin-partition-by-attainment", "holds", "", {},
                {}};
  const auto& q = c.sol.attainment.q_hat;
  const auto& t = c.sol.attainment.t_hat;
  std::vector<std::size_t> diff;
  for (std::size_t i : q)
    if (!in_global(t, i)) diff.push_back(i);
  const std::vector<std::size_t>& expected = diff.empty() ? q : diff;
  r.witnesses.push_back(
      diff.empty() ? "every pessimistic minimizer attains its value: the "
                     "minimal set must equal the whole argmin"
                   : "non-attaining minimizers exist: the minimal set must "
                     "equal exactly those");
  if (c.sol.u_minimal.global != expected)
    r.violations.push_back(
        "upper-order minimal set " +
        join_labels(labels_of(c, c.sol.u_minimal.global)) + " differs from " +
        join_labels(labels_of(c, expected)));
  close_claim(r, q.size(), "empty pessimistic argmin");
  return r;
}

// A local optimistic minimizer that attains its value is locally minimal in
// the lower order at the same radius, unconditionally. An unattained one is
// only covered when nothing on the whole grid attains its optimistic value
// (an attaining point anywhere is itself a tiny-radius minimizer, which
// voids the case split); otherwise it is skipped with a note.
ClaimResult claim_local_optimistic_parts(const Ctx& c) {
  ClaimResult r{"local-optimistic-attainment-parts", "holds", "", {}, {}};
  const auto& locs = c.sol.real_optimistic.local;
  const bool any_attained_anywhere =
      std::any_of(c.fam.results.begin(), c.fam.results.end(),
                  [](const PsiResult& p) { return p.inf_F.attained; });
  std::size_t checked = 0;
  for (const LocalX& lx : locs) {
    if (c.fam.results[lx.index].inf_F.attained) {
      ++checked;
      if (!in_local(c.sol.l_minimal.local, lx.index))
        r.violations.push_back(xlabel(c.fam, lx.index) +
                               " attains its local optimistic value but is "
                               "not locally minimal in the lower set order");
    } else if (!any_attained_anywhere) {
      ++checked;
      if (!in_local(c.sol.l_minimal.local, lx.index))
        r.violations.push_back(xlabel(c.fam, lx.index) +
                               " is a local optimistic minimizer (nothing "
                               "attains anywhere) but not locally minimal in "
                               "the lower set order");
    } else {
      r.witnesses.push_back(
          "skipped " + xlabel(c.fam, lx.index) +
          ": unattained local minimizer while attainment exists elsewhere; "
          "no fixed-radius conclusion");
    }
  }
  r.witnesses.push_back(count_note(checked, "local optimistic minimizers"));
  close_claim(r, checked, "no local optimistic minimizers");
  return r;
}

// Dually: a local pessimistic minimizer that misses its value is locally
// minimal in the upper order at the same radius, unconditionally. An
// attaining one is only covered when every grid point attains its
// pessimistic value; otherwise it is skipped with a note.
ClaimResult claim_local_pessimistic_parts(const Ctx& c) {
  ClaimResult r{"local-pessimistic-attainment-parts", "holds", "", {}, {}};
  const auto& locs = c.sol.real_pessimistic.local;
  const bool all_attained_everywhere =
      std::all_of(c.fam.results.begin(), c.fam.results.end(),
                  [](const PsiResult& p) { return p.sup_F.attained; });
  std::size_t checked = 0;
  for (const LocalX& lx : locs) {
    if (!c.fam.results[lx.index].sup_F.attained) {
      ++checked;
      if (!in_local(c.sol.u_minimal.local, lx.index))
        r.violations.push_back(xlabel(c.fam, lx.index) +
                               " misses its local pessimistic value but is "
                               "not locally minimal in the upper set order");
    } else if (all_attained_everywhere) {
      ++checked;
      if (!in_local(c.sol.u_minimal.local, lx.index))
        r.violations.push_back(xlabel(c.fam, lx.index) +
                               " is a local pessimistic minimizer (attainment "
                               "everywhere) but not locally minimal in the "
                               "upper set order");
    } else {
      r.witnesses.push_back(
          "skipped " + xlabel(c.fam, lx.index) +
          ": attaining local minimizer while attainment fails elsewhere; "
          "no fixed-radius conclusion");
    }
  }
  r.witnesses.push_back(count_note(checked, "local pessimistic minimizers"));
  close_claim(r, checked, "no local pessimistic minimizers");
  return r;
}

// When an instance declares its solution map and the follower also admits a
// grid, the two backends must agree up to one grid step.
ClaimResult claim_backends_agree(const Ctx& c) {
  ClaimResult r{"solution-map-backends-agree", "holds", "", {}, {}};
  if (!c.inst.analysis.psi_declared || c.inst.follower.size() != 1) {
    r.hypothesis = "not-applicable";
    r.conclusion = "skipped";
    r.witnesses.push_back("no declared solution map to cross-check");
    return r;
  }
  if (!c.inst.follower[0].has_step && c.inst.follower[0].declared_points.empty()) {
    r.hypothesis = "not-applicable";
    r.conclusion = "skipped";
    r.witnesses.push_back("follower grid has no uniform step");
    return r;
  }
  const bool family_is_grid = c.inst.analysis.psi == PsiBackend::kGrid;
  const double step =
      c.inst.follower[0].has_step ? c.inst.follower[0].step : 0.0;
  const double tol = step + 1e-9;
  std::size_t compared = 0, skipped = 0;
  for (std::size_t i = 0; i < c.fam.grid.size(); ++i) {
    try {
      const PsiResult grid_r = family_is_grid
                                   ? c.fam.results[i]
                                   : solve_psi_grid(c.inst, c.fam.grid[i]);
      const PsiResult sym_r = family_is_grid
                                  ? solve_psi_symbolic(c.inst, c.fam.grid[i])
                                  : c.fam.results[i];
      if (!sym_r.psi) {
        ++skipped;
        continue;
      }
      ++compared;
      for (const auto& p : grid_r.psi_points)
        if (sym_r.psi->distance(p[0]) > tol)
          r.violations.push_back(
              "grid best response " + format_shortest(p[0]) + " at " +
              xlabel(c.fam, i) + " lies " +
              format_shortest(sym_r.psi->distance(p[0])) +
              " away from the declared solution map");
      for (const Interval& piece : sym_r.psi->pieces())
        for (double e : {piece.lo.value, piece.hi.value}) {
          if (!std::isfinite(e)) continue;
          double best = std::numeric_limits<double>::infinity();
          for (const auto& p : grid_r.psi_points)
            best = std::min(best, std::abs(p[0] - e));
          if (best > tol)
            r.violations.push_back(
                "declared solution-map endpoint " + format_shortest(e) +
                " at " + xlabel(c.fam, i) +
                " has no grid best response within one step");
        }
    } catch (const Error& e) {
      if (e.kind() == "GridUnavailable" || e.kind() == "GridLimit") {
        ++skipped;
        continue;
      }
      throw;
    }
  }
  if (skipped > 0)
    r.witnesses.push_back(std::to_string(skipped) +
                          " leader points had no comparable grid");
  r.witnesses.push_back(count_note(compared, "leader points across backends"));
  close_claim(r, compared, "no leader point admitted both backends");
  return r;
}

bool all_concepts_present(const SolutionsReport& sol) {
  return sol.computed.size() >= 6;
}

std::string snippet(const Json& v) {
  std::string s = render_json(v);
  std::string out;
  bool in_break = false;
  for (char ch : s) {
    if (ch == '\n') {
      in_break = true;
      continue;
    }
    if (in_break && ch == ' ') continue;
    if (in_break) out += ' ';
    in_break = false;
    out += ch;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

void compare_subset(const Json& want, const Json& got, const std::string& path,
                    std::vector<GoldenMismatch>& out) {
  if (want.is_object() && got.is_object()) {
    for (const auto& el : want.items()) {
      const std::string sub = path + "/" + el.key();
      auto it = got.find(el.key());
      if (it == got.end()) {
        out.push_back({sub, snippet(el.value()), "<missing>"});
        continue;
      }
      compare_subset(el.value(), *it, sub, out);
    }
    return;
  }
  if (want.is_array() && got.is_array()) {
    if (want.size() != got.size()) {
      out.push_back({path, "array of " + std::to_string(want.size()),
                     "array of " + std::to_string(got.size())});
      return;
    }
    for (std::size_t i = 0; i < want.size(); ++i)
      compare_subset(want[i], got[i], path + "/" + std::to_string(i), out);
    return;
  }
  const std::string a = snippet(want);
  const std::string b = snippet(got);
  if (a != b) out.push_back({path, a, b});
}

int count_violations(const ImplicationMatrix& m) {
  std::size_t n = 0;
  for (const ClaimResult& c : m.claims) n += c.violations.size();
  return static_cast<int>(n);
}

Json read_golden(const std::filesystem::path& p) {
  std::ifstream in(p);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(p.string(), 0,
                      std::string("malformed golden document: ") + e.what());
  }
}

}  // namespace

bool ImplicationMatrix::any_violation() const {
  return std::any_of(claims.begin(), claims.end(), [](const ClaimResult& c) {
    return !c.violations.empty();
  });
}

ImplicationMatrix run_matrix(const BilevelInstance& inst,
                             const FamilyResult& family,
                             const SolutionsReport& sol) {
  if (!all_concepts_present(sol)) {
    BilevelInstance full = inst;
    full.analysis.concepts.clear();
    SolutionsReport all = solve_concepts(full, family);
    return run_matrix(full, family, all);
  }
  Ctx c{inst, family, sol};
  ImplicationMatrix m;
  m.name = inst.name;
  m.radii = inst.analysis.radii;
  m.claims.push_back(claim_standard_implies_optimistic(c));
  m.claims.push_back(claim_standard_implies_l_and_vector(c));
  m.claims.push_back(claim_attained_optimistic_implies_standard(c));
  m.claims.push_back(claim_attained_local_optimistic_implies_local_standard(c));
  m.claims.push_back(claim_strict_minimizer_bridge(c));
  m.claims.push_back(claim_order_implies_value(c, true));
  m.claims.push_back(claim_order_implies_value(c, false));
  m.claims.push_back(claim_closed_images_converse(c));
  m.claims.push_back(claim_vector_implies_real_and_standard(c));
  m.claims.push_back(claim_optimistic_partition(c));
  m.claims.push_back(claim_pessimistic_partition(c));
  m.claims.push_back(claim_local_optimistic_parts(c));
  m.claims.push_back(claim_local_pessimistic_parts(c));
  m.claims.push_back(claim_backends_agree(c));
  return m;
}

ImplicationMatrix run_matrix(const BilevelInstance& inst, int threads) {
  BilevelInstance full = inst;
  full.analysis.concepts.clear();
  FamilyResult family = image_family(full, threads);
  SolutionsReport sol = solve_concepts(full, family);
  return run_matrix(full, family, sol);
}

Json matrix_json(const ImplicationMatrix& m) {
  Json j = Json::object();
  j["kind"] = "implication-matrix";
  j["name"] = m.name;
  Json radii = Json::array();
  for (double r : m.radii) radii.push_back(r);
  j["radii"] = radii;
  Json claims = Json::array();
  for (const ClaimResult& c : m.claims) {
    Json cj = Json::object();
    cj["id"] = c.id;
    cj["hypothesis"] = c.hypothesis;
    cj["conclusion"] = c.conclusion;
    Json w = Json::array();
    for (const std::string& s : c.witnesses) w.push_back(s);
    cj["witnesses"] = w;
    Json v = Json::array();
    for (const std::string& s : c.violations) v.push_back(s);
    cj["violations"] = v;
    claims.push_back(cj);
  }
  j["claims"] = claims;
  j["violations"] = count_violations(m);
  return j;
}

VerificationReport verify_directory(const std::string& dir, int threads) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::is_directory(root))
    throw Error("Io", "not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".blv" || ext == ".game" || ext == ".rob")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });

  VerificationReport rep;
  for (const fs::path& p : files) {
    FileOutcome out;
    out.file = p.filename().string();
    const std::string ext = p.extension().string();
    Json doc;
    if (ext == ".blv") {
      out.kind = "instance";
      BilevelInstance inst = load_instance_file(p.string());
      FamilyResult family = image_family(inst, threads);
      SolutionsReport sol = solve_concepts(inst, family);
      doc = concept_report_json(inst, family, sol);
      out.matrix_violations = count_violations(run_matrix(inst, family, sol));
    } else if (ext == ".game") {
      out.kind = "game";
      GameTree g = load_game_file(p.string());
      CorrespondenceReport crep = correspondence_report(g);
      doc = game_report_json(crep);
      BilevelInstance inst = to_bilevel(g);
      out.matrix_violations =
          count_violations(run_matrix(inst, crep.family, crep.solutions));
    } else {
      out.kind = "robust";
      UncertainProblem up = load_uncertain_file(p.string());
      RobustEquivalence eq = check_equivalence(up);
      doc = robust_report_json(up, eq);
      if (!eq.minmax_agrees) ++out.matrix_violations;
      if (!eq.optimistic_agrees) ++out.matrix_violations;
      auto signed_insts = build_signed_bilevels(up);
      out.matrix_violations +=
          count_violations(run_matrix(signed_insts.first, threads));
      out.matrix_violations +=
          count_violations(run_matrix(signed_insts.second, threads));
    }
    fs::path golden = p;
    golden.replace_extension();
    golden += ".golden.json";
    if (fs::exists(golden)) {
      compare_subset(read_golden(golden), doc, "", out.mismatches);
      out.golden = out.mismatches.empty() ? "ok" : "mismatch";
    } else {
      out.golden = "absent";
    }
    if (out.matrix_violations != 0 || out.golden == "mismatch") rep.ok = false;
    rep.files.push_back(std::move(out));
  }
  return rep;
}

Json verification_json(const VerificationReport& rep) {
  Json j = Json::object();
  j["kind"] = "verification";
  Json files = Json::array();
  for (const FileOutcome& f : rep.files) {
    Json fj = Json::object();
    fj["file"] = f.file;
    fj["kind"] = f.kind;
    fj["matrix_violations"] = f.matrix_violations;
    fj["golden"] = f.golden;
    Json ms = Json::array();
    for (const GoldenMismatch& m : f.mismatches) {
      Json mj = Json::object();
      mj["key"] = m.key;
      mj["expected"] = m.expected;
      mj["actual"] = m.actual;
      ms.push_back(mj);
    }
    fj["mismatches"] = ms;
    files.push_back(fj);
  }
  j["files"] = files;
  j["ok"] = rep.ok;
  return j;
}

}  // namespace bilevel
