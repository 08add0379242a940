// SPDX-License-Identifier: Apache-2.0
//
// Problem model: sectioned text files declaring leader/follower boxes,
// objectives, an optional piecewise solution map, and analysis settings.
// Instances are immutable after load and shareable across threads.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bilevel/expr.hpp"
#include "bilevel/setreal.hpp"

namespace bilevel {

// Hard cap on leader/follower grid sizes, shared by the loader and by
// command-line override validation.
inline constexpr std::size_t kMaxGridPoints = 1000000;

// Concept names accepted by the 'concepts' filter, in report order.
const std::vector<std::string>& known_concepts();

// Discretization ladder lo + k*step plus the interval ends and any mandatory
// points inside [lo, hi]. A mandatory point replaces a ladder point that lies
// within step*1e-6 of it, so piecewise breakpoints are hit exactly.
std::vector<double> build_axis(double lo, double hi, double step,
                               const std::vector<double>& mandatory);

struct LeaderDim {
  std::string name;
  double lo = 0.0, hi = 0.0, step = 0.0;
  std::vector<double> declared_points;  // from the file
  std::vector<double> mandatory;        // declared + injected breakpoints
};

struct FollowerDim {
  std::string name;
  Expr lo, hi;       // leader-only expressions; +-inf means no grid
  double step = 0.0;
  bool has_step = false;
  std::vector<Expr> declared_points;  // leader-only expressions
  std::vector<Expr> mandatory;        // declared + injected breakpoints
};

// One '[' or '(' ... ')' or ']' piece of a declared solution-map set, with
// expression endpoints; {e} is stored as a both-closed degenerate piece.
struct PsiSetPiece {
  Expr lo, hi;
  bool lo_closed = true, hi_closed = true;
};

struct PsiPiece {
  std::optional<Expr> condition;  // nullopt: the 'else' piece
  std::vector<PsiSetPiece> set;
};

enum class PsiBackend { kGrid, kSymbolic };

struct Analysis {
  double tolerance = 1e-9;
  std::vector<double> radii{1.0 / 3.0, 0.5};
  PsiBackend psi = PsiBackend::kGrid;
  bool psi_declared = false;
  std::vector<std::string> concepts;  // empty = all
  std::vector<std::string> asserts;   // hypothesis names taken on trust
  bool no_equilibrium_declared = false;  // 'spne = none'
};

struct BilevelInstance {
  std::string name;
  std::string source_file;
  std::vector<LeaderDim> leader;
  std::vector<FollowerDim> follower;
  std::optional<Expr> require;  // follower feasibility predicate
  Expr upper, lower;
  std::vector<PsiPiece> psi;  // empty unless a [psi] block was given
  Analysis analysis;
  // Slot environment: leader names first, then follower names.
  std::vector<std::string> env;
};

BilevelInstance load_instance_text(const std::string& text,
                                   const std::string& filename = "<inline>");
BilevelInstance load_instance_file(const std::string& path);
// Canonical re-emission; loading the printed form reproduces the instance.
std::string print_instance(const BilevelInstance& inst);

// Axis of one leader dimension (ladder + mandatory points).
std::vector<double> leader_axis(const BilevelInstance& inst, std::size_t dim);
// Full leader grid, lexicographic over dimension axes.
std::vector<std::vector<double>> leader_grid(const BilevelInstance& inst);
// Follower axis for one dimension at leader point x (x fills leader slots).
// Throws Error("GridUnavailable") on infinite bounds or a missing step, and
// InfeasibleFollowerError when lo > hi.
std::vector<double> follower_axis(const BilevelInstance& inst, std::size_t dim,
                                  std::span<const double> x);
// Feasible follower points at x: axis product filtered by the predicate.
// Throws InfeasibleFollowerError when nothing remains.
std::vector<std::vector<double>> follower_points(const BilevelInstance& inst,
                                                 std::span<const double> x);

// "(0.5)" or "(0.5, 1)" — used in error messages and reports.
std::string point_label(std::span<const double> x);

}  // namespace bilevel
