// SPDX-License-Identifier: Apache-2.0
#include "bilevel/lower.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bilevel/errors.hpp"
#include "bilevel/model.hpp"
#include "bilevel/setreal.hpp"
#include "doctest.h"

using bilevel::BilevelInstance;
using bilevel::Error;
using bilevel::eval_upper;
using bilevel::FamilyResult;
using bilevel::image_family;
using bilevel::InfeasibleFollowerError;
using bilevel::load_instance_text;
using bilevel::MonotonePiece;
using bilevel::NonMonotonePieceError;
using bilevel::NoPsiPieceError;
using bilevel::PsiResult;
using bilevel::RealSet;
using bilevel::Side;
using bilevel::solve_psi;
using bilevel::solve_psi_grid;
using bilevel::solve_psi_symbolic;
using bilevel::space_norm;
using bilevel::UnboundedLowerError;
using bilevel::window_inf;

namespace {

BilevelInstance load(const std::string& text) {
  return load_instance_text(text);
}

std::vector<double> pt(double x) { return {x}; }

// Quantity competition: both players pay 2 per unit and sell at the market
// price max(4 - total, 0).
const char* kDuopoly = R"(
[leader]
x = 0 .. 4 step 0.5

[follower]
y = 0 .. 4 step 0.5

[objectives]
upper = 2 * x - x * max(4 - (x + y), 0)
lower = 2 * y - y * max(4 - (x + y), 0)
)";

// Follower indifferent across [0,1] at x = 0, pinned elsewhere; the leader
// objective ignores y entirely.
const char* kPsiJump = R"(
[leader]
x = -1 .. 1 step 0.25

[follower]
y = 0 .. 1 step 0.25

[objectives]
upper = x
lower = x * y

[psi]
when x < 0 -> {1}
when x = 0 -> [0, 1]
else -> {0}

[analysis]
psi = symbolic
radii = 0.5
)";

// Same follower, but the leader objective switches arms at y = 1/2, so the
// image of psi(0) = [0,1] has two separated components.
const char* kMixed = R"(
[leader]
x = -1 .. 1 step 0.25

[follower]
y = 0 .. 1 step 0.25

[objectives]
upper = cases { y > 1/2 -> x - y; else -> x^2 + y^2 }
lower = x * y

[psi]
when x < 0 -> {1}
when x = 0 -> [0, 1]
else -> {0}

[analysis]
psi = symbolic
radii = 1/3, 0.5
)";

}  // namespace

TEST_CASE("grid backend: unique best response on the quantity game") {
  BilevelInstance inst = load(kDuopoly);
  PsiResult r = solve_psi_grid(inst, pt(1.0));
  // f(1, y) = 2y - y*max(3 - y, 0) = y^2 - y on [0,3]; minimum at y = 1/2.
  REQUIRE(r.psi_points.size() == 1);
  CHECK(r.psi_points[0][0] == 0.5);
  CHECK(r.lower_value == -0.25);
  CHECK(r.psi->to_string() == "{0.5}");
  // F(1, 0.5) = 2 - max(2.5, 0) = -0.5.
  CHECK(r.image->to_string() == "{-0.5}");
  CHECK(r.inf_F.value == -0.5);
  CHECK(r.inf_F.attained);
  CHECK(r.sup_F.value == -0.5);
  CHECK(r.psi_values == std::vector<double>{-0.5});
  CHECK(r.pieces.empty());
}

TEST_CASE("grid backend: exact ties are all reported") {
  BilevelInstance inst = load(R"(
[leader]
x = 0 .. 1 step 1

[follower]
y = 0 .. 4 step 1

[objectives]
upper = y
lower = abs((y - 1) * (y - 3))
)");
  PsiResult r = solve_psi_grid(inst, pt(0.0));
  REQUIRE(r.psi_points.size() == 2);
  CHECK(r.psi_points[0][0] == 1.0);
  CHECK(r.psi_points[1][0] == 3.0);
  CHECK(r.lower_value == 0.0);
  CHECK(r.psi->to_string() == "{1} u {3}");
  CHECK(r.image->to_string() == "{1} u {3}");
  CHECK(r.inf_F.value == 1.0);
  CHECK(r.sup_F.value == 3.0);
}

TEST_CASE("grid backend: tolerance widens the reported tie set") {
  BilevelInstance inst = load(R"(
[leader]
x = 0 .. 1 step 1

[follower]
y = 0 .. 1 step 0.1

[objectives]
upper = 1 - y
lower = y

[analysis]
tolerance = 0.25
)");
  PsiResult r = solve_psi_grid(inst, pt(0.0));
  // y = 0, 0.1, 0.2 sit within 0.25 of the minimum 0; 0.1*3 rounds above it.
  REQUIRE(r.psi_points.size() == 3);
  CHECK(r.psi_points[2][0] == 0.2);
  CHECK(r.lower_value == 0.0);
}

TEST_CASE("grid backend: follower objective unbounded below") {
  BilevelInstance inst = load(R"(
[leader]
x = 0 .. 1 step 1

[follower]
y = 0 .. 1 step 1

[objectives]
upper = x
lower = -inf
)");
  CHECK_THROWS_AS(solve_psi_grid(inst, pt(0.0)), UnboundedLowerError);
}

TEST_CASE("grid backend: two follower dimensions") {
  BilevelInstance inst = load(R"(
[leader]
x = 0 .. 1 step 1

[follower]
y = 0 .. 1 step 1
z = 0 .. 1 step 1

[objectives]
upper = y + z
lower = abs(y - z)
)");
  PsiResult r = solve_psi_grid(inst, pt(0.0));
  REQUIRE(r.psi_points.size() == 2);
  CHECK(r.psi_points[0] == std::vector<double>{0.0, 0.0});
  CHECK(r.psi_points[1] == std::vector<double>{1.0, 1.0});
  CHECK_FALSE(r.psi.has_value());  // no one-dimensional set form
  CHECK(r.image->to_string() == "{0} u {2}");
}

TEST_CASE("symbolic backend: indifference interval maps to a point image") {
  BilevelInstance inst = load(kPsiJump);

  PsiResult left = solve_psi_symbolic(inst, pt(-0.5));
  CHECK(left.psi->to_string() == "{1}");
  CHECK(left.image->to_string() == "{-0.5}");
  CHECK(left.lower_value == -0.5);  // f(-1/2, 1) = -1/2

  PsiResult mid = solve_psi_symbolic(inst, pt(0.0));
  CHECK(mid.psi->to_string() == "[0,1]");
  CHECK(mid.image->to_string() == "{0}");
  CHECK(mid.lower_value == 0.0);
  REQUIRE(mid.pieces.size() == 1);
  CHECK(mid.pieces[0].shape == MonotonePiece::Shape::kConstant);
  CHECK(mid.pieces[0].y_lo == 0.0);
  CHECK(mid.pieces[0].y_hi == 1.0);

  PsiResult right = solve_psi_symbolic(inst, pt(0.5));
  CHECK(right.psi->to_string() == "{0}");
  CHECK(right.image->to_string() == "{0.5}");
}

TEST_CASE("symbolic backend: arm switch splits the image into components") {
  BilevelInstance inst = load(kMixed);

  PsiResult mid = solve_psi_symbolic(inst, pt(0.0));
  CHECK(mid.psi->to_string() == "[0,1]");
  // y in [0,1/2] pays y^2, y in (1/2,1] pays -y: [0,1/4] plus [-1,-1/2).
  CHECK(*mid.image == RealSet::parse("[-1,-0.5) u [0,0.25]"));
  CHECK(mid.inf_F.value == -1.0);
  CHECK(mid.inf_F.attained);
  CHECK(mid.sup_F.value == 0.25);
  CHECK(mid.sup_F.attained);
  REQUIRE(mid.pieces.size() == 3);
  CHECK(mid.pieces[0].shape == MonotonePiece::Shape::kIncreasing);
  CHECK(mid.pieces[0].value_lo == 0.0);
  CHECK(mid.pieces[0].value_hi == 0.25);
  CHECK_FALSE(mid.pieces[0].hi_closed);
  CHECK(mid.pieces[1].shape == MonotonePiece::Shape::kConstant);
  CHECK(mid.pieces[1].value_lo == 0.25);
  CHECK(mid.pieces[2].shape == MonotonePiece::Shape::kDecreasing);
  CHECK(mid.pieces[2].value_lo == -0.5);  // limit into the switch point
  CHECK(mid.pieces[2].value_hi == -1.0);

  PsiResult left = solve_psi_symbolic(inst, pt(-0.5));
  CHECK(left.image->to_string() == "{-1.5}");  // y = 1 pays x - 1
  PsiResult right = solve_psi_symbolic(inst, pt(0.5));
  CHECK(right.image->to_string() == "{0.25}");  // y = 0 pays x^2
}

TEST_CASE("symbolic backend: half-open best responses keep exact endpoints") {
  BilevelInstance inst = load(R"(
[leader]
x = 0 .. 1 step 0.25

[follower]
y = 0 .. 1 step 0.25

[objectives]
upper = cases { x < 1 -> x - y; else -> y - 1 }
lower = floor(x + y)

[psi]
when x < 1 -> [0, 1 - x)
else -> [0, 1)

[analysis]
psi = symbolic
)");
  for (double x : {0.0, 0.25, 0.5, 0.75}) {
    PsiResult r = solve_psi_symbolic(inst, pt(x));
    const double cut = 1.0 - x;  // declared upper end of the response set
    CHECK(*r.psi == RealSet::interval(0.0, true, cut, false));
    // F(x, .) = x - y falls from x (attained at y = 0) toward x - cut.
    CHECK(*r.image == RealSet::interval(x - cut, false, x, true));
    CHECK(r.inf_F.value == x - cut);
    CHECK_FALSE(r.inf_F.attained);
    CHECK(r.sup_F.value == x);
    CHECK(r.sup_F.attained);
  }
  PsiResult edge = solve_psi_symbolic(inst, pt(1.0));
  CHECK(*edge.psi == RealSet::interval(0.0, true, 1.0, false));
  CHECK(*edge.image == RealSet::parse("[-1,0)"));
  CHECK(edge.inf_F.value == -1.0);
  CHECK(edge.inf_F.attained);
  CHECK_FALSE(edge.sup_F.attained);
}

TEST_CASE("symbolic backend: unbounded response set with a vanishing tail") {
  BilevelInstance inst = load(R"(
[leader]
x = 0 .. 2 step 1

[follower]
y = x .. inf

[objectives]
upper = exp(x - y)
lower = 0

[psi]
else -> [x, inf)

[analysis]
psi = symbolic
)");
  for (double x : {0.0, 1.0, 2.0}) {
    PsiResult r = solve_psi_symbolic(inst, pt(x));
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(*r.psi == RealSet::interval(x, true, inf, false));
    CHECK(*r.image == RealSet::parse("(0,1]"));
    CHECK(r.inf_F.value == 0.0);
    CHECK_FALSE(r.inf_F.attained);
    CHECK(r.sup_F.value == 1.0);
    CHECK(r.sup_F.attained);
    REQUIRE(r.pieces.size() == 1);
    CHECK(r.pieces[0].shape == MonotonePiece::Shape::kDecreasing);
    CHECK(r.lower_value == 0.0);
  }
  // The same instance has no follower grid, so the grid backend must refuse.
  CHECK_THROWS_AS(solve_psi_grid(inst, pt(0.0)), Error);
}

TEST_CASE("symbolic backend: lower objective may use floor freely") {
  BilevelInstance inst = load(R"(
[leader]
x = 0 .. 1 step 0.5

[follower]
y = 0 .. 1 step 0.5

[objectives]
upper = x - y
lower = cases { x = 0 -> floor(y); else -> -(x * y) }

[psi]
when x = 0 -> [0, 1)
else -> {1}

[analysis]
psi = symbolic
)");
  PsiResult at0 = solve_psi_symbolic(inst, pt(0.0));
  CHECK(*at0.image == RealSet::parse("(-1,0]"));
  CHECK(at0.lower_value == 0.0);  // floor(0) at the representative y = 0
  PsiResult at_half = solve_psi_symbolic(inst, pt(0.5));
  CHECK(at_half.image->to_string() == "{-0.5}");
  CHECK(at_half.lower_value == -0.5);
}

TEST_CASE("symbolic backend: refuses shapes it cannot classify") {
  BilevelInstance parabola = load(R"(
[leader]
x = 0 .. 1 step 0.5

[follower]
y = 0 .. 2 step 0.5

[objectives]
upper = (y - 1)^2
lower = 0

[psi]
else -> [0, 2]

[analysis]
psi = symbolic
)");
  CHECK_THROWS_WITH_AS(solve_psi_symbolic(parabola, pt(0.0)),
                       doctest::Contains("not monotone"),
                       NonMonotonePieceError);

  BilevelInstance stairs = load(R"(
[leader]
x = 0 .. 1 step 0.5

[follower]
y = 0 .. 2 step 0.5

[objectives]
upper = floor(y)
lower = 0

[psi]
else -> [0, 2]

[analysis]
psi = symbolic
)");
  CHECK_THROWS_WITH_AS(solve_psi_symbolic(stairs, pt(0.0)),
                       doctest::Contains("floor"), NonMonotonePieceError);

  // floor of a leader-only argument is constant in y and stays classifiable.
  BilevelInstance leader_floor = load(R"(
[leader]
x = 0 .. 1 step 0.5

[follower]
y = 0 .. 2 step 0.5

[objectives]
upper = floor(x) - y
lower = 0

[psi]
else -> [0, 2]

[analysis]
psi = symbolic
)");
  CHECK(solve_psi_symbolic(leader_floor, pt(0.0)).image->to_string() ==
        "[-2,0]");
}

TEST_CASE("symbolic backend: piece selection failures are reported") {
  BilevelInstance no_piece = load(R"(
[leader]
x = 0 .. 1 step 0.5

[follower]
y = 0 .. 1 step 0.5

[objectives]
upper = x
lower = 0

[psi]
when x < 1 -> {0}

[analysis]
psi = symbolic
)");
  CHECK(solve_psi_symbolic(no_piece, pt(0.5)).image->to_string() == "{0.5}");
  CHECK_THROWS_AS(solve_psi_symbolic(no_piece, pt(1.0)), NoPsiPieceError);

  BilevelInstance empty_piece = load(R"(
[leader]
x = 0 .. 1 step 0.5

[follower]
y = 0 .. 1 step 0.5

[objectives]
upper = x
lower = 0

[psi]
else -> [x, 0)

[analysis]
psi = symbolic
)");
  CHECK_THROWS_AS(solve_psi_symbolic(empty_piece, pt(1.0)),
                  InfeasibleFollowerError);
}

TEST_CASE("grid results stay inside symbolic results as the grid refines") {
  const char* pattern = R"(
[leader]
x = -1 .. 1 step 0.5

[follower]
y = 0 .. 1 step %STEP%

[objectives]
upper = x
lower = x * y

[psi]
when x < 0 -> {1}
when x = 0 -> [0, 1]
else -> {0}

[analysis]
psi = %MODE%
)";
  auto instantiate = [&](const std::string& step, const std::string& mode) {
    std::string text = pattern;
    text.replace(text.find("%STEP%"), 6, step);
    text.replace(text.find("%MODE%"), 6, mode);
    return load(text);
  };

  BilevelInstance symbolic = instantiate("0.5", "symbolic");
  double previous_gap = std::numeric_limits<double>::infinity();
  for (const std::string step : {"0.1", "0.01", "0.001"}) {
    BilevelInstance gridded = instantiate(step, "grid");
    double gap = 0.0;
    for (const std::vector<double>& x : bilevel::leader_grid(gridded)) {
      PsiResult g = solve_psi_grid(gridded, x);
      PsiResult s = solve_psi_symbolic(symbolic, x);
      for (const std::vector<double>& y : g.psi_points) {
        CHECK(s.psi->contains(y[0]));
        gap = std::max(gap, 0.0);
      }
      for (double v : g.psi_values) CHECK(s.image->contains(v));
      // How much of the exact response set the grid still misses.
      for (const bilevel::Interval& piece : s.psi->pieces()) {
        for (double frac : {0.0, 0.25, 0.5, 0.75, 1.0}) {
          const double sample =
              piece.lo.value + frac * (piece.hi.value - piece.lo.value);
          gap = std::max(gap, g.psi->distance(sample));
        }
      }
    }
    CHECK(gap <= previous_gap);
    previous_gap = gap;
  }
  CHECK(previous_gap <= 0.001);
}

TEST_CASE("window queries clip monotone stretches exactly") {
  BilevelInstance inst = load(kMixed);
  PsiResult mid = solve_psi_symbolic(inst, pt(0.0));

  auto whole = window_inf(inst, mid, 0.5, 10.0);
  REQUIRE(whole.has_value());
  CHECK(whole->value == -1.0);
  CHECK(whole->attained);

  auto near_zero = window_inf(inst, mid, 0.0, 0.3);
  REQUIRE(near_zero.has_value());
  CHECK(near_zero->value == 0.0);
  CHECK(near_zero->attained);

  auto near_one = window_inf(inst, mid, 1.0, 0.2);
  REQUIRE(near_one.has_value());
  CHECK(near_one->value == -1.0);
  CHECK(near_one->attained);

  // Window (0.45, 0.55): the decreasing arm is clipped at the open edge
  // y = 0.55, whose value -0.55 is approached but not attained.
  auto straddle = window_inf(inst, mid, 0.5, 0.05);
  REQUIRE(straddle.has_value());
  CHECK(straddle->value == -0.55);
  CHECK_FALSE(straddle->attained);

  CHECK_FALSE(window_inf(inst, mid, -5.0, 1.0).has_value());
  CHECK_FALSE(window_inf(inst, mid, 0.5, 0.0).has_value());
}

TEST_CASE("one-sided objective queries resolve switch points") {
  BilevelInstance inst = load(kMixed);
  CHECK(eval_upper(inst, pt(0.0), 0.5) == 0.25);
  CHECK(eval_upper(inst, pt(0.0), 0.5, Side::kBelow) == 0.25);
  CHECK(eval_upper(inst, pt(0.0), 0.5, Side::kAbove) == -0.5);
  CHECK(eval_upper(inst, pt(0.25), 1.0) == -0.75);
}

TEST_CASE("family sweep matches pointwise solves and is thread-stable") {
  BilevelInstance inst = load(kPsiJump);
  FamilyResult seq = image_family(inst, 1);
  REQUIRE(seq.grid.size() == 9);  // -1 .. 1 in quarter steps
  for (std::size_t i = 0; i < seq.grid.size(); ++i) {
    PsiResult direct = solve_psi(inst, seq.grid[i]);
    CHECK(*seq.results[i].image == *direct.image);
    CHECK(*seq.results[i].psi == *direct.psi);
    CHECK(seq.results[i].lower_value == direct.lower_value);
  }

  FamilyResult par = image_family(inst, 4);
  REQUIRE(par.results.size() == seq.results.size());
  for (std::size_t i = 0; i < seq.results.size(); ++i) {
    CHECK(*par.results[i].image == *seq.results[i].image);
    CHECK(*par.results[i].psi == *seq.results[i].psi);
    CHECK(par.results[i].lower_value == seq.results[i].lower_value);
    CHECK(par.results[i].inf_F == seq.results[i].inf_F);
    CHECK(par.results[i].sup_F == seq.results[i].sup_F);
  }
}

TEST_CASE("family sweep surfaces the earliest failing grid point") {
  BilevelInstance inst = load(R"(
[leader]
x = -1 .. 1 step 0.5

[follower]
y = 0 .. 2 step 0.5

[objectives]
upper = (y - 1)^2
lower = 0

[psi]
else -> [0, 2]

[analysis]
psi = symbolic
)");
  for (int threads : {1, 3}) {
    try {
      image_family(inst, threads);
      FAIL("expected a classification error");
    } catch (const NonMonotonePieceError& e) {
      CHECK(std::string(e.what()).find("(-1)") != std::string::npos);
    }
  }
}

TEST_CASE("euclidean distance between points") {
  std::vector<double> a{1.0, 2.0}, b{4.0, 6.0};
  CHECK(space_norm(a, b) == 5.0);
  CHECK(space_norm(a, a) == 0.0);
  std::vector<double> c{2.0}, d{-1.0};
  CHECK(space_norm(c, d) == 3.0);
}
