// SPDX-License-Identifier: Apache-2.0
//
// Robust-optimization bridge: worst-case (min-max) and best-case (optimistic)
// counterparts of a scalar problem under grid uncertainty, plus bilevel
// reformulations whose solution concepts reproduce the robust solution sets.
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bilevel/expr.hpp"
#include "bilevel/model.hpp"

namespace bilevel {

// One finite value ladder lo + k*step inside [lo, hi].
struct UncertainDim {
  std::string name;
  double lo = 0.0, hi = 0.0, step = 0.0;
};

// Scalar objective phi(x, xi) minimized in x over a feasible grid while the
// parameter xi ranges over an uncertainty grid.
struct UncertainProblem {
  std::string name;
  std::string source_file;
  Expr phi;
  std::vector<UncertainDim> feasible;     // decision grid
  std::vector<UncertainDim> uncertainty;  // parameter grid
  // Slot environment: feasible names first, then uncertainty names.
  std::vector<std::string> env;
};

UncertainProblem load_uncertain_text(const std::string& text,
                                     const std::string& filename = "<inline>");
UncertainProblem load_uncertain_file(const std::string& path);

// Enumerated grids with the per-decision worst/best values over the
// uncertainty grid and the argmin index set of each table.
struct RobustSolutionReport {
  std::vector<std::vector<double>> s_points;  // decision grid, row-major
  std::vector<std::vector<double>> u_points;  // uncertainty grid, row-major
  std::vector<double> worst_case;             // max of phi(x, .) per decision
  std::vector<double> best_case;              // min of phi(x, .) per decision
  std::vector<std::size_t> minmax;            // argmin of worst_case
  std::vector<std::size_t> optimistic;        // argmin of best_case
};

RobustSolutionReport robust_report(const UncertainProblem& p);

// Decision points achieving the min-max (resp. best-case) optimum; ties kept.
std::vector<std::vector<double>> solve_minmax(const UncertainProblem& p);
std::vector<std::vector<double>> solve_optimistic(const UncertainProblem& p);

// Bilevel instance with a constant lower objective: every uncertainty point
// is a best reply, so the leader faces the whole uncertainty grid and the
// image of each decision is the full set of phi values.
BilevelInstance build_dummy_bilevel(const UncertainProblem& p);

// Bilevel pair steering the follower against and with the leader: the first
// instance minimizes -phi below (best replies maximize phi), the second
// minimizes phi below; both keep phi as the leader objective.
std::pair<BilevelInstance, BilevelInstance> build_signed_bilevels(
    const UncertainProblem& p);

// Three-way agreement between the direct tables and both reformulations.
struct RobustEquivalence {
  RobustSolutionReport report;
  std::vector<std::vector<double>> dummy_minmax, dummy_optimistic;
  std::vector<std::vector<double>> signed_minmax, signed_optimistic;
  bool minmax_agrees = false;
  bool optimistic_agrees = false;
};

RobustEquivalence check_equivalence(const UncertainProblem& p);

}  // namespace bilevel
