// Follower-level analysis: the best-response set psi(x), the follower's
// optimal value, and the exact image of psi(x) under the leader objective.
//
// Two backends produce the same PsiResult shape:
//  - grid: exhaustive argmin over the follower grid (ties within tolerance),
//  - symbolic: a declared best-response map evaluated exactly, with the
//    image assembled from monotone stretches of y -> F(x, y).
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bilevel/expr.hpp"
#include "bilevel/model.hpp"
#include "bilevel/setreal.hpp"

namespace bilevel {

// One stretch of follower values over which y -> F(x, y) is strictly
// monotone or constant. value_lo/value_hi are the one-sided limits of F at
// the ends (exact values when the end is closed). Only the symbolic backend
// fills these in.
struct MonotonePiece {
  enum class Shape { kConstant, kIncreasing, kDecreasing };

  double y_lo = 0.0, y_hi = 0.0;  // may be +-inf (then the end is open)
  bool lo_closed = false, hi_closed = false;
  double value_lo = 0.0, value_hi = 0.0;
  Shape shape = Shape::kConstant;
};

// Everything the engine knows about one leader point.
struct PsiResult {
  std::vector<double> x;

  // Best responses. `psi` is the set form (one-dimensional followers only);
  // `psi_points` lists explicit members in grid mode (empty in symbolic
  // mode, where the set form is exact).
  std::optional<RealSet> psi;
  std::vector<std::vector<double>> psi_points;
  // Leader-objective value at each psi_points entry, in the same order.
  std::vector<double> psi_values;

  double lower_value = 0.0;  // the follower's optimal value at x

  std::optional<RealSet> image;  // F(x, psi(x))
  Extremum inf_F, sup_F;         // extrema of the image with attainment

  // Exact structure of y -> F(x, y) over psi(x); symbolic backend only.
  std::vector<MonotonePiece> pieces;
};

PsiResult solve_psi_grid(const BilevelInstance& inst, std::span<const double> x);
PsiResult solve_psi_symbolic(const BilevelInstance& inst,
                             std::span<const double> x);
// Dispatches on inst.analysis.psi.
PsiResult solve_psi(const BilevelInstance& inst, std::span<const double> x);

// Per-point results for the whole leader grid, in grid order. `threads > 1`
// splits the grid by index; the output is identical to the sequential run,
// and the error raised (if any) is the one belonging to the earliest grid
// index.
struct FamilyResult {
  std::vector<std::vector<double>> grid;
  std::vector<PsiResult> results;
};
FamilyResult image_family(const BilevelInstance& inst, int threads = 1);

// Leader-objective value at (x, y). `side` takes one-sided limits in y,
// which resolves values at open follower endpoints.
double eval_upper(const BilevelInstance& inst, std::span<const double> x,
                  double y, Side side = Side::kExact);

// Infimum of F(x, .) over psi(x) intersected with the open window
// (center - radius, center + radius), computed from the monotone pieces.
// nullopt when the window misses psi(x). Symbolic results only.
std::optional<Extremum> window_inf(const BilevelInstance& inst,
                                   const PsiResult& r, double center,
                                   double radius);

// Euclidean norm of a - b; the building block of the product norm on
// leader x follower space.
double space_norm(std::span<const double> a, std::span<const double> b);

}  // namespace bilevel
