#include "bilevel/games.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "bilevel/errors.hpp"
#include "bilevel/expr.hpp"
#include "bilevel/numfmt.hpp"

namespace bilevel {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_move_name(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
    return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  return true;
}

double parse_cost(const std::string& s, const std::string& file, int line) {
  const std::string t = trim(s);
  double v = 0.0;
  const char* b = t.data();
  const char* e = b + t.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e || !std::isfinite(v))
    throw SchemaError(file, line, "expected a finite cost, got '" + t + "'");
  return v;
}

std::string stem_of(const std::string& filename) {
  std::size_t slash = filename.find_last_of('/');
  std::string base =
      slash == std::string::npos ? filename : filename.substr(slash + 1);
  std::size_t dot = base.find_last_of('.');
  if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
  return base;
}

// Best replies (follower argmin) at every move.
std::vector<std::vector<std::size_t>> best_replies(const GameTree& g) {
  std::vector<std::vector<std::size_t>> best(g.leader_moves.size());
  for (std::size_t i = 0; i < g.leader_moves.size(); ++i) {
    double m = g.costs[i][0].second;
    for (const auto& c : g.costs[i]) m = std::min(m, c.second);
    for (std::size_t j = 0; j < g.costs[i].size(); ++j)
      if (g.costs[i][j].second == m) best[i].push_back(j);
  }
  return best;
}

// cases-expression selecting per-(x, y) values; collapses to a literal when
// only one leaf exists.
Expr select_expr(const GameTree& g, bool leader_side) {
  ExprBuilder b;
  std::vector<std::int32_t> pairs;
  std::int32_t last = -1;
  const std::size_t n = g.leader_moves.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g.costs[i].size(); ++j) {
      const double cost =
          leader_side ? g.costs[i][j].first : g.costs[i][j].second;
      const bool is_last = i + 1 == n && j + 1 == g.costs[i].size();
      if (is_last) {
        last = b.literal(cost);
        continue;
      }
      const std::int32_t cond = b.binary(
          NodeKind::kAnd,
          b.binary(NodeKind::kEq, b.variable("x"),
                   b.literal(static_cast<double>(i))),
          b.binary(NodeKind::kEq, b.variable("y"),
                   b.literal(static_cast<double>(j))));
      pairs.push_back(cond);
      pairs.push_back(b.literal(cost));
    }
  }
  if (pairs.empty()) return std::move(b).finish(last);
  return std::move(b).finish(b.cases(pairs, last));
}

// cases-expression for the largest follower code available at each move.
Expr menu_top_expr(const GameTree& g) {
  ExprBuilder b;
  const std::size_t n = g.leader_moves.size();
  std::vector<std::int32_t> pairs;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    pairs.push_back(b.binary(NodeKind::kEq, b.variable("x"),
                             b.literal(static_cast<double>(i))));
    pairs.push_back(b.literal(static_cast<double>(g.costs[i].size() - 1)));
  }
  const std::int32_t last =
      b.literal(static_cast<double>(g.costs[n - 1].size() - 1));
  if (pairs.empty()) return std::move(b).finish(last);
  return std::move(b).finish(b.cases(pairs, last));
}

}  // namespace

GameTree load_game_text(const std::string& text, const std::string& filename) {
  GameTree g;
  g.source_file = filename;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    const std::size_t arrow = line.find("->");
    if (arrow == std::string::npos) {
      const std::size_t eq = line.find('=');
      if (eq != std::string::npos && trim(line.substr(0, eq)) == "name") {
        g.name = trim(line.substr(eq + 1));
        if (g.name.empty())
          throw SchemaError(filename, lineno, "empty game name");
        continue;
      }
      throw SchemaError(filename, lineno,
                        "expected 'move -> reply : leader_cost, follower_cost'");
    }
    const std::size_t colon = line.find(':', arrow + 2);
    if (colon == std::string::npos)
      throw SchemaError(filename, lineno, "missing ':' before the costs");
    const std::string move = trim(line.substr(0, arrow));
    const std::string reply = trim(line.substr(arrow + 2, colon - arrow - 2));
    if (!is_move_name(move) || !is_move_name(reply))
      throw SchemaError(filename, lineno,
                        "moves must be identifiers, got '" + move + "' / '" +
                            reply + "'");
    const std::string rest = line.substr(colon + 1);
    const std::size_t comma = rest.find(',');
    if (comma == std::string::npos)
      throw SchemaError(filename, lineno,
                        "expected two comma-separated costs");
    const double lc = parse_cost(rest.substr(0, comma), filename, lineno);
    const double fc = parse_cost(rest.substr(comma + 1), filename, lineno);

    std::size_t i = 0;
    for (; i < g.leader_moves.size(); ++i)
      if (g.leader_moves[i] == move) break;
    if (i == g.leader_moves.size()) {
      g.leader_moves.push_back(move);
      g.follower_moves.emplace_back();
      g.costs.emplace_back();
    }
    for (const std::string& r : g.follower_moves[i])
      if (r == reply)
        throw SchemaError(filename, lineno,
                          "duplicate leaf " + move + " -> " + reply);
    g.follower_moves[i].push_back(reply);
    g.costs[i].emplace_back(lc, fc);
  }
  if (g.leader_moves.empty())
    throw SchemaError(filename, lineno, "game has no moves");
  if (g.name.empty()) {
    g.name = stem_of(filename);
    if (g.name.empty() || g.name == "<inline>") g.name = "game";
  }
  return g;
}

GameTree load_game_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("Io", "file not found: " + path);
  std::ostringstream body;
  body << in.rdbuf();
  return load_game_text(body.str(), path);
}

std::string profile_label(const GameTree& g, const StrategyProfile& p) {
  std::string out = "(" + g.leader_moves[p.x] + ", [";
  for (std::size_t i = 0; i < p.policy.size(); ++i) {
    if (i > 0) out += ", ";
    out += g.leader_moves[i] + "->" + g.follower_moves[i][p.policy[i]];
  }
  return out + "])";
}

std::vector<StrategyProfile> spne_enumerate(const GameTree& g) {
  const std::size_t n = g.leader_moves.size();
  const std::vector<std::vector<std::size_t>> best = best_replies(g);

  std::vector<StrategyProfile> out;
  std::vector<std::size_t> pick(n, 0);  // index into best[i]
  for (;;) {
    std::vector<std::size_t> policy(n);
    for (std::size_t i = 0; i < n; ++i) policy[i] = best[i][pick[i]];

    double cheapest = g.costs[0][policy[0]].first;
    for (std::size_t i = 1; i < n; ++i)
      cheapest = std::min(cheapest, g.costs[i][policy[i]].first);
    for (std::size_t i = 0; i < n; ++i)
      if (g.costs[i][policy[i]].first == cheapest)
        out.push_back({i, policy});

    std::size_t d = n;
    while (d > 0) {
      --d;
      if (++pick[d] < best[d].size()) break;
      pick[d] = 0;
      if (d == 0) {
        std::sort(out.begin(), out.end(),
                  [](const StrategyProfile& a, const StrategyProfile& b) {
                    if (a.x != b.x) return a.x < b.x;
                    return a.policy < b.policy;
                  });
        return out;
      }
    }
  }
}

BilevelInstance to_bilevel(const GameTree& g) {
  const std::size_t n = g.leader_moves.size();
  std::ostringstream text;
  text << "name = " << g.name << "\n\n";
  text << "[leader]\nx = 0 .. " << format_shortest(static_cast<double>(n - 1))
       << " step 1\n\n";
  text << "[follower]\ny = 0 .. " << menu_top_expr(g).to_string()
       << " step 1\n\n";
  text << "[objectives]\n";
  text << "upper = " << select_expr(g, true).to_string() << "\n";
  text << "lower = " << select_expr(g, false).to_string() << "\n";
  return load_instance_text(text.str(), g.source_file);
}

CorrespondenceReport correspondence_report(const GameTree& g) {
  CorrespondenceReport rep;
  rep.tree = g;
  rep.spne = spne_enumerate(g);

  BilevelInstance inst = to_bilevel(g);
  rep.family = image_family(inst);
  rep.solutions = solve_concepts(inst, rep.family);

  auto add = [&](const std::string& concept_name,
                 const std::vector<std::size_t>& members) {
    std::vector<std::size_t> seen;
    for (std::size_t m : members) {
      if (std::find(seen.begin(), seen.end(), m) != seen.end()) continue;
      seen.push_back(m);
      MoveMatch match{concept_name, m, {}};
      for (std::size_t k = 0; k < rep.spne.size(); ++k)
        if (rep.spne[k].x == m) match.spne.push_back(k);
      rep.matches.push_back(std::move(match));
    }
  };
  auto project = [](const std::vector<PairMember>& pairs) {
    std::vector<std::size_t> xs;
    for (const PairMember& p : pairs) xs.push_back(p.index);
    return xs;
  };

  add("real_optimistic", rep.solutions.real_optimistic.global);
  add("real_pessimistic", rep.solutions.real_pessimistic.global);
  add("standard_optimistic", project(rep.solutions.standard_optimistic.global));
  add("l_minimal", rep.solutions.l_minimal.global);
  add("u_minimal", rep.solutions.u_minimal.global);
  add("vector", project(rep.solutions.vector_optimal.global));

  for (std::size_t k = 0; k < rep.spne.size(); ++k) {
    const std::size_t x = rep.spne[k].x;
    const bool opt =
        std::find(rep.solutions.real_optimistic.global.begin(),
                  rep.solutions.real_optimistic.global.end(),
                  x) != rep.solutions.real_optimistic.global.end();
    const bool pess =
        std::find(rep.solutions.real_pessimistic.global.begin(),
                  rep.solutions.real_pessimistic.global.end(),
                  x) != rep.solutions.real_pessimistic.global.end();
    if (!opt && !pess) rep.unmatched_spne.push_back(k);
  }
  return rep;
}

}  // namespace bilevel
