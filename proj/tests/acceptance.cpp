// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance runner. Each numbered criterion prints exactly one
// PASS/FAIL line; failures list what went wrong underneath. The binary
// exits nonzero when any criterion fails.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bilevel/games.hpp"
#include "bilevel/lower.hpp"
#include "bilevel/model.hpp"
#include "bilevel/numfmt.hpp"
#include "bilevel/report.hpp"
#include "bilevel/robust.hpp"
#include "bilevel/setreal.hpp"
#include "bilevel/solutions.hpp"
#include "bilevel/verify.hpp"

namespace {

using namespace bilevel;

std::string example(const std::string& name) {
  return std::string(BILEVEL_EXAMPLES_DIR) + "/" + name;
}

struct Checker {
  std::vector<std::string> problems;
  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
};

int g_failures = 0;

void criterion(int n, const std::string& label,
               const std::function<void(Checker&)>& body) {
  Checker c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.problems.push_back(std::string("unexpected exception: ") + e.what());
  }
  const bool ok = c.problems.empty();
  if (!ok) ++g_failures;
  std::printf("%d. %-68s %s\n", n, label.c_str(), ok ? "PASS" : "FAIL");
  for (const std::string& p : c.problems)
    std::printf("     - %s\n", p.c_str());
  std::fflush(stdout);
}

struct Solved {
  BilevelInstance inst;
  FamilyResult family;
  SolutionsReport sol;
};

Solved solve_file(const std::string& name) {
  Solved s;
  s.inst = load_instance_file(example(name));
  s.family = image_family(s.inst);
  s.sol = solve_concepts(s.inst, s.family);
  return s;
}

double x_at(const FamilyResult& f, std::size_t i) { return f.grid[i][0]; }

std::vector<double> x_values(const FamilyResult& f,
                             const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (std::size_t i : idx) out.push_back(x_at(f, i));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s = "{";
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? ", " : "") + format_shortest(v[i]);
  return s + "}";
}

bool has_local_x(const FamilyResult& f, const XConcept& c, double x) {
  for (const LocalX& m : c.local)
    if (x_at(f, m.index) == x) return true;
  return false;
}

const LocalPair* find_local_pair(const FamilyResult& f, const PairConcept& c,
                                 double x, double y) {
  for (const LocalPair& m : c.local)
    if (x_at(f, m.member.index) == x && m.member.y == std::vector<double>{y})
      return &m;
  return nullptr;
}

// ---- helpers for the randomized suites ---------------------------------

struct SetGen {
  std::mt19937_64 rng;
  explicit SetGen(std::uint64_t seed) : rng(seed) {}
  double grid_value() {
    return std::uniform_int_distribution<int>(-32, 32)(rng) / 16.0;
  }
  bool coin() { return (rng() & 1u) != 0; }
  RealSet random_set() {
    for (;;) {
      const int n = std::uniform_int_distribution<int>(1, 3)(rng);
      std::vector<Interval> pieces;
      for (int i = 0; i < n; ++i) {
        double a = grid_value(), b = grid_value();
        if (a > b) std::swap(a, b);
        bool lc = coin(), hc = coin();
        if (a == b) lc = hc = true;
        pieces.push_back(Interval{{a, lc}, {b, hc}});
      }
      try {
        return RealSet::canonicalize(std::move(pieces));
      } catch (const EmptySetError&) {
      }
    }
  }
};

std::string rational(std::mt19937& rng) {
  const int num = static_cast<int>(rng() % 17) - 8;
  const int den = 1 + static_cast<int>(rng() % 4);
  if (den == 1) return "(" + std::to_string(num) + ")";
  return "(" + std::to_string(num) + "/" + std::to_string(den) + ")";
}

std::string rand_expr(std::mt19937& rng, const std::vector<std::string>& vars,
                      int depth) {
  if (depth == 0 || rng() % 4 == 0) {
    if (rng() % 3 != 2) return vars[rng() % vars.size()];
    return rational(rng);
  }
  const std::string a = rand_expr(rng, vars, depth - 1);
  const std::string b = rand_expr(rng, vars, depth - 1);
  switch (rng() % 7) {
    case 0: return "(" + a + " + " + b + ")";
    case 1: return "(" + a + " - " + b + ")";
    case 2: return "(" + a + " * " + b + ")";
    case 3: return "min(" + a + ", " + b + ")";
    case 4: return "max(" + a + ", " + b + ")";
    case 5: return "abs(" + a + ")";
    default: return "floor(" + a + ")";
  }
}

std::string random_instance_text(std::mt19937& rng) {
  const int nx = 2 + static_cast<int>(rng() % 5);
  const int ny = 1 + static_cast<int>(rng() % 5);
  const int ylo = -2 + static_cast<int>(rng() % 3);
  std::string yhi = std::to_string(ylo + ny - 1);
  if (rng() % 3 == 0) yhi += " + floor(x / 2)";  // leader-dependent menus
  std::string text;
  text += "[leader]\nx = 0 .. " + std::to_string(nx - 1) + " step 1\n\n";
  text += "[follower]\ny = " + std::to_string(ylo) + " .. " + yhi +
          " step 1\n\n";
  text += "[objectives]\nupper = " + rand_expr(rng, {"x", "y"}, 3) + "\n";
  text += "lower = " + rand_expr(rng, {"x", "y"}, 3) + "\n";
  return text;
}

// Feasible and uncertainty grids of at most 20 points each, with a random
// piecewise-smooth objective over their product.
UncertainProblem random_uncertain(std::mt19937& rng) {
  auto make_dims = [&](const std::string& prefix) {
    std::vector<UncertainDim> dims;
    if (rng() % 2 == 0) {
      const int len = 1 + static_cast<int>(rng() % 20);
      const double lo = static_cast<double>(static_cast<int>(rng() % 5) - 2);
      const double step = (rng() % 2 == 0) ? 0.5 : 1.0;
      dims.push_back({prefix + "1", lo, lo + (len - 1) * step, step});
    } else {
      const int la = 1 + static_cast<int>(rng() % 4);
      const int lb = 1 + static_cast<int>(rng() % 5);
      dims.push_back({prefix + "1", -1.0, -1.0 + (la - 1) * 1.0, 1.0});
      dims.push_back({prefix + "2", 0.0, (lb - 1) * 1.0, 1.0});
    }
    return dims;
  };
  UncertainProblem p;
  p.name = "random";
  p.source_file = "<generated>";
  p.feasible = make_dims("x");
  p.uncertainty = make_dims("q");
  for (const auto& d : p.feasible) p.env.push_back(d.name);
  for (const auto& d : p.uncertainty) p.env.push_back(d.name);
  p.phi = Expr::parse(rand_expr(rng, p.env, 3));
  return p;
}

GameTree random_tree(std::mt19937& rng, std::size_t max_moves,
                     std::size_t max_replies, unsigned cost_range) {
  GameTree g;
  g.name = "random";
  const std::size_t n = 1 + rng() % max_moves;
  for (std::size_t i = 0; i < n; ++i) {
    g.leader_moves.push_back("m" + std::to_string(i));
    g.follower_moves.emplace_back();
    g.costs.emplace_back();
    const std::size_t m = 1 + rng() % max_replies;
    for (std::size_t j = 0; j < m; ++j) {
      g.follower_moves[i].push_back("r" + std::to_string(j));
      g.costs[i].emplace_back(static_cast<double>(rng() % cost_range),
                              static_cast<double>(rng() % cost_range));
    }
  }
  return g;
}

// Equilibria straight from the definition: every complete profile checked.
std::vector<StrategyProfile> brute_force_spne(const GameTree& g) {
  const std::size_t n = g.leader_moves.size();
  std::vector<double> reply_min(n);
  for (std::size_t i = 0; i < n; ++i) {
    reply_min[i] = g.costs[i][0].second;
    for (const auto& c : g.costs[i])
      reply_min[i] = std::min(reply_min[i], c.second);
  }
  std::vector<StrategyProfile> out;
  std::vector<std::size_t> policy(n, 0);
  for (;;) {
    bool follower_ok = true;
    for (std::size_t i = 0; i < n; ++i)
      if (g.costs[i][policy[i]].second != reply_min[i]) follower_ok = false;
    if (follower_ok) {
      double cheapest = g.costs[0][policy[0]].first;
      for (std::size_t i = 1; i < n; ++i)
        cheapest = std::min(cheapest, g.costs[i][policy[i]].first);
      for (std::size_t i = 0; i < n; ++i)
        if (g.costs[i][policy[i]].first == cheapest) out.push_back({i, policy});
    }
    std::size_t d = n;
    for (;;) {
      if (d == 0) {
        std::sort(out.begin(), out.end(),
                  [](const StrategyProfile& a, const StrategyProfile& b) {
                    if (a.x != b.x) return a.x < b.x;
                    return a.policy < b.policy;
                  });
        return out;
      }
      --d;
      if (++policy[d] < g.costs[d].size()) break;
      policy[d] = 0;
    }
  }
}

// Runs the installed command-line binary, capturing stdout bytes.
struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli_capture(const std::vector<std::string>& args) {
  static int counter = 0;
  const auto path = std::filesystem::temp_directory_path() /
                    ("acceptance_" + std::to_string(::getpid()) + "_" +
                     std::to_string(counter++) + ".out");
  auto quote = [](const std::string& s) {
    std::string q = "'";
    for (char c : s) q += (c == '\'') ? std::string("'\\''") : std::string(1, c);
    return q + "'";
  };
  std::string cmd = quote(BILEVEL_CLI_PATH);
  for (const std::string& a : args) cmd += " " + quote(a);
  cmd += " > " + quote(path.string()) + " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  r.out = buf.str();
  std::filesystem::remove(path);
  return r;
}

// ---- the criteria -------------------------------------------------------

void duopoly(Checker& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Solved s = solve_file("stackelberg.blv");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  c.expect(seconds < 5.0,
           "solve took " + format_shortest(seconds) + "s (limit 5s)");

  std::size_t off_form = 0, empty = 0;
  for (std::size_t i = 0; i < s.family.grid.size(); ++i) {
    const double x = x_at(s.family, i);
    const double closed_form = (2.0 - x) / 2.0;
    const PsiResult& r = s.family.results[i];
    if (r.psi_points.empty()) ++empty;
    for (const auto& p : r.psi_points)
      if (std::abs(p[0] - closed_form) > 1e-3) ++off_form;
  }
  c.expect(empty == 0, std::to_string(empty) + " leader points had no "
                       "computed best response");
  c.expect(off_form == 0,
           std::to_string(off_form) +
               " best responses sit further than 1e-3 from (2 - x) / 2");

  c.expect(x_values(s.family, s.sol.real_optimistic.global) ==
               std::vector<double>{1.0},
           "real optimistic is " +
               join(x_values(s.family, s.sol.real_optimistic.global)) +
               ", want {1}");
  c.expect(x_values(s.family, s.sol.real_pessimistic.global) ==
               std::vector<double>{1.0},
           "real pessimistic is " +
               join(x_values(s.family, s.sol.real_pessimistic.global)) +
               ", want {1}");
  const auto& std_pairs = s.sol.standard_optimistic.global;
  c.expect(std_pairs.size() == 1 &&
               x_at(s.family, std_pairs[0].index) == 1.0 &&
               std_pairs[0].y == std::vector<double>{0.5},
           "standard optimistic is not exactly {(1, 0.5)}");
}

void unattained(Checker& c) {
  Solved s = solve_file("unattained_infimum.blv");
  std::size_t bad_value = 0, attained = 0;
  for (const PsiResult& r : s.family.results) {
    if (r.inf_F.value != 0.0) ++bad_value;
    if (r.inf_F.attained) ++attained;
  }
  c.expect(bad_value == 0, std::to_string(bad_value) +
                               " grid points have optimistic value != 0");
  c.expect(attained == 0, std::to_string(attained) +
                              " grid points report the infimum as attained");
  c.expect(s.sol.real_optimistic.global.size() == s.family.grid.size(),
           "real optimistic holds " +
               std::to_string(s.sol.real_optimistic.global.size()) + " of " +
               std::to_string(s.family.grid.size()) + " grid points");
  c.expect(s.sol.standard_optimistic.global.empty(),
           "standard optimistic is nonempty");
  c.expect(s.sol.standard_optimistic.note.find("infimum unattained") !=
               std::string::npos,
           "diagnostic note lacks 'infimum unattained': \"" +
               s.sol.standard_optimistic.note + "\"");
}

void floor_images(Checker& c) {
  Solved s = solve_file("floor_gap.blv");
  std::size_t bad_image = 0, identity_gap = 0;
  for (std::size_t i = 0; i < s.family.grid.size(); ++i) {
    const double x = x_at(s.family, i);
    const PsiResult& r = s.family.results[i];
    std::string want;
    if (x < 1.0) {
      const double lo = x - (1.0 - x);
      // The open endpoint is the engine's own subtraction; record that it
      // coincides with the algebraic 2x - 1 to double precision.
      if (std::abs(lo - (2.0 * x - 1.0)) > 1e-12) ++identity_gap;
      want = RealSet::canonicalize({Interval{{lo, false}, {x, true}}})
                 .to_string();
    } else {
      want = "[-1,0)";
    }
    if (!r.image.has_value() || r.image->to_string() != want) ++bad_image;
  }
  c.expect(identity_gap == 0, "the two open-endpoint formulas disagree");
  c.expect(bad_image == 0, std::to_string(bad_image) +
                               " image sets differ from the expected table");

  c.expect(x_values(s.family, s.sol.real_optimistic.global) ==
               std::vector<double>({0.0, 1.0}),
           "real optimistic is " +
               join(x_values(s.family, s.sol.real_optimistic.global)) +
               ", want {0, 1}");
  c.expect(x_values(s.family, s.sol.l_minimal.global) ==
               std::vector<double>{1.0},
           "l-minimal is " +
               join(x_values(s.family, s.sol.l_minimal.global)) +
               ", want {1}");
  const auto& pairs = s.sol.standard_optimistic.global;
  c.expect(pairs.size() == 1 && x_at(s.family, pairs[0].index) == 1.0 &&
               pairs[0].y == std::vector<double>{0.0},
           "standard optimistic is not exactly {(1, 0)}");
  const auto& vec = s.sol.vector_optimal.global;
  c.expect(vec.size() == 1 && x_at(s.family, vec[0].index) == 1.0 &&
               vec[0].value == -1.0,
           "vector solution is not exactly {(1, -1)}");
}

void response_jump(Checker& c) {
  Solved lin = solve_file("psi_jump_linear.blv");
  const LocalPair* lp =
      find_local_pair(lin.family, lin.sol.standard_optimistic, 0.0, 0.0);
  c.expect(lp != nullptr && lp->radius == 0.5,
           "linear case: (0, 0) is not a local standard pair at radius 1/2");
  c.expect(!has_local_x(lin.family, lin.sol.real_optimistic, 0.0),
           "linear case: x = 0 wrongly counts as local real optimistic");
  c.expect(!has_local_x(lin.family, lin.sol.l_minimal, 0.0),
           "linear case: x = 0 wrongly counts as local l-minimal");

  Solved ab = solve_file("psi_jump_abs.blv");
  const LocalPair* ap =
      find_local_pair(ab.family, ab.sol.standard_optimistic, 0.0, 0.0);
  c.expect(ap != nullptr && ap->radius == 0.5,
           "absolute case: (0, 0) is not a local standard pair at radius 1/2");
  c.expect(has_local_x(ab.family, ab.sol.real_optimistic, 0.0),
           "absolute case: x = 0 missing from local real optimistic");
}

void mixed_image(Checker& c) {
  Solved s = solve_file("mixed_image.blv");
  const PsiResult* at_zero = nullptr;
  for (std::size_t i = 0; i < s.family.grid.size(); ++i)
    if (x_at(s.family, i) == 0.0) at_zero = &s.family.results[i];
  c.expect(at_zero != nullptr && at_zero->image.has_value() &&
               at_zero->image->to_string() == "[-1,-0.5) u [0,0.25]",
           "image at x = 0 is not [-1,-0.5) u [0,0.25]");
  c.expect(x_values(s.family, s.sol.real_optimistic.global) ==
               std::vector<double>{-1.0},
           "real optimistic is " +
               join(x_values(s.family, s.sol.real_optimistic.global)) +
               ", want {-1}");
  c.expect(x_values(s.family, s.sol.l_minimal.global) ==
               std::vector<double>{-1.0},
           "l-minimal is " + join(x_values(s.family, s.sol.l_minimal.global)) +
               ", want {-1}");
  const LocalPair* lp =
      find_local_pair(s.family, s.sol.standard_optimistic, 0.0, 0.0);
  c.expect(lp != nullptr && lp->radius == 1.0 / 3.0,
           "(0, 0) is not a local standard pair at radius 1/3");
  c.expect(!has_local_x(s.family, s.sol.real_optimistic, 0.0),
           "x = 0 wrongly counts as local real optimistic");
  c.expect(!has_local_x(s.family, s.sol.l_minimal, 0.0),
           "x = 0 wrongly counts as local l-minimal");
}

void floor_game(Checker& c) {
  Solved s = solve_file("floor_game.blv");
  std::size_t bad = 0;
  for (std::size_t i = 0; i < s.family.grid.size(); ++i)
    if (s.family.results[i].inf_F.value != x_at(s.family, i) - 1.0) ++bad;
  c.expect(bad == 0, std::to_string(bad) +
                         " grid points have optimistic value != x - 1");
  c.expect(x_values(s.family, s.sol.real_optimistic.global) ==
               std::vector<double>{0.0},
           "real optimistic is " +
               join(x_values(s.family, s.sol.real_optimistic.global)) +
               ", want {0}");
  c.expect(s.inst.analysis.no_equilibrium_declared,
           "fixture does not declare the missing equilibrium");
  const Json doc = no_equilibrium_report_json(s.inst, s.family, s.sol);
  c.expect(doc["equilibria"].empty() &&
               doc["note"].get<std::string>().find(
                   "no subgame-perfect equilibrium") != std::string::npos,
           "no-equilibrium report does not carry the declaration");
}

void robust_triangle(Checker& c) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(20260814u);
  std::size_t disagreements = 0, oversized = 0;
  for (int round = 0; round < 200; ++round) {
    const UncertainProblem p = random_uncertain(rng);
    const RobustEquivalence eq = check_equivalence(p);
    if (eq.report.s_points.size() > 20 || eq.report.u_points.size() > 20)
      ++oversized;
    if (!eq.minmax_agrees || !eq.optimistic_agrees) ++disagreements;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  c.expect(oversized == 0, "generator exceeded the 20-point grid bound");
  c.expect(disagreements == 0,
           std::to_string(disagreements) +
               " of 200 instances broke the three-way agreement");
  c.expect(seconds < 30.0,
           "triangle suite took " + format_shortest(seconds) + "s (limit 30s)");
}

void property_suites(Checker& c) {
  {  // Set-order laws on random sets.
    SetGen gen(0xacce97edULL);
    std::size_t law_failures = 0;
    for (int t = 0; t < 10000; ++t) {
      RealSet a = gen.random_set();
      RealSet b = gen.random_set();
      RealSet x = gen.random_set();
      if (!leq_l(a, a) || !leq_u(a, a)) ++law_failures;
      if (leq_l(a, b) && leq_l(b, x) && !leq_l(a, x)) ++law_failures;
      if (leq_u(a, b) && leq_u(b, x) && !leq_u(a, x)) ++law_failures;
      if (leq_l(a, b) != leq_u(negate(b), negate(a))) ++law_failures;
      if (leq_l(a, b) && !(a.inf().value <= b.inf().value)) ++law_failures;
      if (leq_u(a, b) && !(a.sup().value <= b.sup().value)) ++law_failures;
    }
    c.expect(law_failures == 0,
             std::to_string(law_failures) +
                 " set-order law violations across 10000 random triples");
  }
  {  // Implication matrix across random finite instances.
    std::mt19937 rng(0x5eedu);
    std::size_t violations = 0;
    for (int round = 0; round < 500; ++round) {
      BilevelInstance inst = load_instance_text(random_instance_text(rng));
      if (run_matrix(inst, 1).any_violation()) ++violations;
    }
    c.expect(violations == 0,
             std::to_string(violations) +
                 " of 500 random instances violated a checked implication");
  }
  {  // Game translation against direct backward induction.
    std::mt19937 rng(0x9a3eu);
    std::size_t mismatches = 0;
    for (int round = 0; round < 200; ++round) {
      GameTree g = random_tree(rng, 6, 6, 6);
      CorrespondenceReport rep = correspondence_report(g);
      if (rep.spne != brute_force_spne(g)) ++mismatches;

      const std::size_t n = g.leader_moves.size();
      std::vector<double> fo(n), fp(n);
      for (std::size_t i = 0; i < n; ++i) {
        double m = g.costs[i][0].second;
        for (const auto& cost : g.costs[i]) m = std::min(m, cost.second);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& cost : g.costs[i]) {
          if (cost.second != m) continue;
          lo = std::min(lo, cost.first);
          hi = std::max(hi, cost.first);
        }
        fo[i] = lo;
        fp[i] = hi;
      }
      std::vector<std::size_t> realopt, realpess;
      const double fo_min = *std::min_element(fo.begin(), fo.end());
      const double fp_min = *std::min_element(fp.begin(), fp.end());
      for (std::size_t i = 0; i < n; ++i) {
        if (fo[i] == fo_min) realopt.push_back(i);
        if (fp[i] == fp_min) realpess.push_back(i);
      }
      if (rep.solutions.real_optimistic.global != realopt) ++mismatches;
      if (rep.solutions.real_pessimistic.global != realpess) ++mismatches;
    }
    c.expect(mismatches == 0,
             std::to_string(mismatches) +
                 " correspondence mismatches across 200 random trees");
  }
}

void determinism(Checker& c) {
  RunResult one =
      run_cli_capture({"verify", BILEVEL_EXAMPLES_DIR, "--threads=1"});
  RunResult eight =
      run_cli_capture({"verify", BILEVEL_EXAMPLES_DIR, "--threads=8"});
  c.expect(one.code == 0, "verify with one thread exited " +
                              std::to_string(one.code));
  c.expect(eight.code == 0, "verify with eight threads exited " +
                                std::to_string(eight.code));
  c.expect(!one.out.empty(), "verify produced no output");
  c.expect(one.out == eight.out,
           "outputs differ between one and eight threads");
}

}  // namespace

int main() {
  criterion(1, "duopoly: closed-form responses, unique leader optimum, < 5s",
            duopoly);
  criterion(2, "unattained infimum: zero optimistic value, no standard pair",
            unattained);
  criterion(3, "floor objective: half-open image table and split optima",
            floor_images);
  criterion(4, "response jump: local pair survives where point concepts fail",
            response_jump);
  criterion(5, "two-piece image: local contrast at the jump point",
            mixed_image);
  criterion(6, "floor game: linear optimistic value, declared no-equilibrium",
            floor_game);
  criterion(7, "robust triangle: 200 random instances, three-way agreement",
            robust_triangle);
  criterion(8, "property suites: set orders, implications, game translation",
            property_suites);
  criterion(9, "determinism: verify output byte-identical across threads",
            determinism);
  if (g_failures == 0) {
    std::printf("all 9 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", g_failures);
  return 1;
}
