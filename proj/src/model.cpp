// SPDX-License-Identifier: Apache-2.0
#include "bilevel/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>

#include "bilevel/errors.hpp"
#include "bilevel/numfmt.hpp"

namespace bilevel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_ident(const std::string& s) {
  if (s.empty()) return false;
  auto head = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  };
  if (!head(s[0])) return false;
  for (char c : s) {
    if (!head(c) && !(c >= '0' && c <= '9')) return false;
  }
  static const char* reserved[] = {"cases", "else", "and", "or",   "inf",
                                   "abs",   "exp",  "floor", "max", "min"};
  for (const char* r : reserved) {
    if (s == r) return false;
  }
  return true;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return s.substr(b, e - b);
}

// First occurrence of `needle` outside any (), {}; npos if none. When
// `word` is set, the match must not touch identifier characters.
std::size_t find_top(const std::string& s, const std::string& needle,
                     bool word = false) {
  int depth = 0;
  auto ident_char = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_';
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '{' || c == '[') {
      ++depth;
      continue;
    }
    if (c == ')' || c == '}' || c == ']') {
      --depth;
      continue;
    }
    if (depth != 0) continue;
    if (s.compare(i, needle.size(), needle) != 0) continue;
    if (word) {
      if (i > 0 && ident_char(s[i - 1])) continue;
      const std::size_t after = i + needle.size();
      if (after < s.size() && ident_char(s[after])) continue;
    }
    return i;
  }
  return std::string::npos;
}

std::vector<std::string> split_top_commas(const std::string& s) {
  std::vector<std::string> out;
  int depth = 0;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '{' || c == '[') ++depth;
    else if (c == ')' || c == '}' || c == ']') --depth;
    else if (c == ',' && depth == 0) {
      out.push_back(trim(s.substr(begin, i - begin)));
      begin = i + 1;
    }
  }
  out.push_back(trim(s.substr(begin)));
  return out;
}

struct FileCursor {
  std::string file;
  int line = 0;
  [[noreturn]] void fail(const std::string& message) const {
    throw SchemaError(file, line, message);
  }
};

Expr parse_expr_at(const FileCursor& at, const std::string& text,
                   const std::string& what) {
  try {
    return Expr::parse(text);
  } catch (const ParseError& e) {
    at.fail(what + ": " + e.what());
  }
}

double parse_number_at(const FileCursor& at, const std::string& text,
                       const std::string& what) {
  const Expr e = parse_expr_at(at, text, what);
  if (!e.names().empty()) at.fail(what + " must be a constant");
  try {
    const BoundExpr b(&e, {});
    return b.evaluate({});
  } catch (const Error& err) {
    at.fail(what + ": " + err.what());
  }
}

// ---------------------------------------------------------------------------
// Solution-map set grammar: piece ('u' piece)*, piece = {e} | [e, e) | ...

std::vector<PsiSetPiece> parse_psi_set(const FileCursor& at,
                                       const std::string& text) {
  std::vector<PsiSetPiece> out;
  std::size_t i = 0;
  const std::string s = trim(text);
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    if (i >= s.size()) break;
    const char open = s[i];
    if (open == '{') {
      int depth = 0;
      std::size_t j = i + 1;
      for (; j < s.size(); ++j) {
        if (s[j] == '(' || s[j] == '{' || s[j] == '[') ++depth;
        else if (s[j] == ')' || s[j] == ']') --depth;
        else if (s[j] == '}') {
          if (depth == 0) break;
          --depth;
        }
      }
      if (j >= s.size()) at.fail("unterminated '{' in solution-map set");
      const Expr e = parse_expr_at(at, s.substr(i + 1, j - i - 1),
                                   "solution-map point");
      PsiSetPiece piece;
      piece.lo = e;
      piece.hi = e;
      out.push_back(std::move(piece));
      i = j + 1;
    } else if (open == '[' || open == '(') {
      int depth = 0;
      std::size_t comma = std::string::npos, close = std::string::npos;
      std::size_t j = i + 1;
      for (; j < s.size(); ++j) {
        const char c = s[j];
        if (c == '(' || c == '{' || c == '[') ++depth;
        else if (c == ')' || c == ']') {
          if (depth == 0) {
            close = j;
            break;
          }
          --depth;
        } else if (c == '}') {
          --depth;
        } else if (c == ',' && depth == 0) {
          if (comma != std::string::npos)
            at.fail("too many commas in interval");
          comma = j;
        }
      }
      if (close == std::string::npos)
        at.fail("unterminated interval in solution-map set");
      if (comma == std::string::npos)
        at.fail("interval needs two endpoints separated by ','");
      PsiSetPiece piece;
      piece.lo = parse_expr_at(at, s.substr(i + 1, comma - i - 1),
                               "interval endpoint");
      piece.hi = parse_expr_at(at, s.substr(comma + 1, close - comma - 1),
                               "interval endpoint");
      piece.lo_closed = open == '[';
      piece.hi_closed = s[close] == ']';
      out.push_back(std::move(piece));
      i = close + 1;
    } else {
      at.fail(std::string("expected '[', '(' or '{' in solution-map set, "
                          "found '") +
              open + "'");
    }
    // Separator: 'u' or end.
    while (i < s.size() && s[i] == ' ') ++i;
    if (i < s.size()) {
      if (s[i] == 'u' && (i + 1 == s.size() || s[i + 1] == ' ')) {
        ++i;
      } else {
        at.fail("expected 'u' between solution-map pieces");
      }
    }
  }
  if (out.empty()) at.fail("empty solution-map set");
  return out;
}

std::string print_psi_set(const std::vector<PsiSetPiece>& set) {
  std::string out;
  for (std::size_t k = 0; k < set.size(); ++k) {
    if (k) out += " u ";
    const PsiSetPiece& p = set[k];
    if (p.lo_closed && p.hi_closed && p.lo.same_structure(p.hi)) {
      out += "{" + p.lo.to_string() + "}";
    } else {
      out += p.lo_closed ? '[' : '(';
      out += p.lo.to_string() + ", " + p.hi.to_string();
      out += p.hi_closed ? ']' : ')';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loader

struct DimClauses {
  std::string lo, hi, step, points;
  bool has_step = false, has_points = false;
};

DimClauses split_dim_clauses(const FileCursor& at, const std::string& rhs) {
  DimClauses out;
  const std::size_t dots = find_top(rhs, "..");
  if (dots == std::string::npos)
    at.fail("dimension needs 'lo .. hi' bounds");
  out.lo = trim(rhs.substr(0, dots));
  std::string rest = rhs.substr(dots + 2);
  const std::size_t istep = find_top(rest, "step", /*word=*/true);
  const std::size_t ipoints = find_top(rest, "points", /*word=*/true);
  if (istep != std::string::npos && ipoints != std::string::npos &&
      ipoints < istep)
    at.fail("'step' must come before 'points'");
  std::size_t hi_end = std::min(istep, ipoints);
  if (hi_end == std::string::npos) hi_end = rest.size();
  out.hi = trim(rest.substr(0, hi_end));
  if (istep != std::string::npos) {
    const std::size_t send =
        ipoints == std::string::npos ? rest.size() : ipoints;
    out.step = trim(rest.substr(istep + 4, send - istep - 4));
    out.has_step = true;
  }
  if (ipoints != std::string::npos) {
    out.points = trim(rest.substr(ipoints + 6));
    out.has_points = true;
  }
  if (out.lo.empty() || out.hi.empty()) at.fail("empty dimension bound");
  return out;
}

}  // namespace

const std::vector<std::string>& known_concepts() {
  static const std::vector<std::string> names = {
      "real_optimistic", "real_pessimistic", "standard_optimistic",
      "l_minimal",       "u_minimal",        "vector"};
  return names;
}

// ---------------------------------------------------------------------------
// build_axis

std::vector<double> build_axis(double lo, double hi, double step,
                               const std::vector<double>& mandatory) {
  if (!(step > 0.0) || !std::isfinite(step))
    throw Error("Axis", "step must be a positive finite number");
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw Error("GridUnavailable", "axis bounds must be finite");
  if (lo > hi) throw Error("Axis", "axis lower bound exceeds upper bound");

  std::vector<double> pts;
  const double span = hi - lo;
  const double count = std::floor(span / step + 1e-9);
  if (count > static_cast<double>(kMaxGridPoints))
    throw Error("GridLimit", "axis would exceed the grid point limit");
  const std::size_t n = static_cast<std::size_t>(count);
  pts.reserve(n + 2 + mandatory.size());
  for (std::size_t k = 0; k <= n; ++k) {
    const double v = lo + static_cast<double>(k) * step;
    pts.push_back(v > hi ? hi : v);
  }
  pts.push_back(hi);
  for (double m : mandatory) {
    if (m >= lo && m <= hi) pts.push_back(m);
  }
  std::sort(pts.begin(), pts.end());

  // Cluster within step*1e-6; a mandatory member wins its cluster so that
  // declared breakpoints appear bit-exactly.
  auto is_mandatory = [&mandatory](double v) {
    for (double m : mandatory) {
      if (m == v) return true;
    }
    return false;
  };
  const double tol = step * 1e-6;
  std::vector<double> out;
  std::size_t i = 0;
  while (i < pts.size()) {
    std::size_t j = i;
    double rep = pts[i];
    bool rep_mandatory = is_mandatory(rep);
    while (j + 1 < pts.size() && pts[j + 1] - pts[i] <= tol) {
      ++j;
      if (!rep_mandatory && is_mandatory(pts[j])) {
        rep = pts[j];
        rep_mandatory = true;
      }
    }
    out.push_back(rep);
    i = j + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loading

BilevelInstance load_instance_text(const std::string& text,
                                   const std::string& filename) {
  BilevelInstance inst;
  inst.source_file = filename;

  enum class Section { kNone, kLeader, kFollower, kObjectives, kPsi,
                       kAnalysis };
  Section section = Section::kNone;
  bool has_upper = false, has_lower = false, has_name = false;
  bool saw_psi_block = false, saw_else = false;
  bool radii_declared = false;
  FileCursor at{filename, 0};
  FileCursor upper_at = at, lower_at = at;
  std::vector<FileCursor> leader_at, follower_at;
  std::vector<FileCursor> psi_at;

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++at.line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') at.fail("unterminated section header");
      const std::string name = line.substr(1, line.size() - 2);
      if (name == "leader") section = Section::kLeader;
      else if (name == "follower") section = Section::kFollower;
      else if (name == "objectives") section = Section::kObjectives;
      else if (name == "psi") {
        section = Section::kPsi;
        saw_psi_block = true;
      } else if (name == "analysis") section = Section::kAnalysis;
      else at.fail("unknown section [" + name + "]");
      continue;
    }

    if (section == Section::kPsi) {
      // 'when <condition> -> <set>' or 'else -> <set>'
      const std::size_t arrow = find_top(line, "->");
      if (arrow == std::string::npos)
        at.fail("solution-map piece needs '->'");
      const std::string head = trim(line.substr(0, arrow));
      const std::string body = trim(line.substr(arrow + 2));
      PsiPiece piece;
      if (head == "else") {
        if (saw_else) at.fail("duplicate 'else' solution-map piece");
        saw_else = true;
      } else {
        if (saw_else) at.fail("'else' must be the last solution-map piece");
        if (head.compare(0, 5, "when ") != 0)
          at.fail("solution-map piece must start with 'when' or 'else'");
        piece.condition =
            parse_expr_at(at, head.substr(5), "solution-map condition");
      }
      piece.set = parse_psi_set(at, body);
      inst.psi.push_back(std::move(piece));
      psi_at.push_back(at);
      continue;
    }

    const std::size_t eq = find_top(line, "=");
    if (eq == std::string::npos) at.fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) at.fail("missing key before '='");
    if (value.empty()) at.fail("missing value for '" + key + "'");

    switch (section) {
      case Section::kNone: {
        if (key == "name") {
          inst.name = value;
          has_name = true;
        } else {
          at.fail("only 'name' may appear before the first section");
        }
        break;
      }
      case Section::kLeader: {
        if (!is_ident(key)) at.fail("invalid dimension name '" + key + "'");
        const DimClauses c = split_dim_clauses(at, value);
        LeaderDim dim;
        dim.name = key;
        dim.lo = parse_number_at(at, c.lo, "leader bound");
        dim.hi = parse_number_at(at, c.hi, "leader bound");
        if (!std::isfinite(dim.lo) || !std::isfinite(dim.hi))
          at.fail("leader bounds must be finite");
        if (dim.lo > dim.hi) at.fail("leader lower bound exceeds upper bound");
        if (!c.has_step) at.fail("leader dimension needs a step");
        dim.step = parse_number_at(at, c.step, "step");
        if (!(dim.step > 0.0) || !std::isfinite(dim.step))
          at.fail("step must be positive");
        if (c.has_points) {
          for (const std::string& p : split_top_commas(c.points)) {
            dim.declared_points.push_back(parse_number_at(at, p, "point"));
          }
        }
        dim.mandatory = dim.declared_points;
        inst.leader.push_back(std::move(dim));
        leader_at.push_back(at);
        break;
      }
      case Section::kFollower: {
        if (key == "require") {
          if (inst.require) at.fail("duplicate 'require'");
          inst.require = parse_expr_at(at, value, "require");
          break;
        }
        if (!is_ident(key)) at.fail("invalid dimension name '" + key + "'");
        const DimClauses c = split_dim_clauses(at, value);
        FollowerDim dim;
        dim.name = key;
        dim.lo = parse_expr_at(at, c.lo, "follower bound");
        dim.hi = parse_expr_at(at, c.hi, "follower bound");
        if (c.has_step) {
          dim.step = parse_number_at(at, c.step, "step");
          if (!(dim.step > 0.0) || !std::isfinite(dim.step))
            at.fail("step must be positive");
          dim.has_step = true;
        }
        if (c.has_points) {
          for (const std::string& p : split_top_commas(c.points)) {
            dim.declared_points.push_back(parse_expr_at(at, p, "point"));
          }
        }
        dim.mandatory = dim.declared_points;
        inst.follower.push_back(std::move(dim));
        follower_at.push_back(at);
        break;
      }
      case Section::kObjectives: {
        if (key == "upper") {
          if (has_upper) at.fail("duplicate 'upper'");
          inst.upper = parse_expr_at(at, value, "upper objective");
          has_upper = true;
          upper_at = at;
        } else if (key == "lower") {
          if (has_lower) at.fail("duplicate 'lower'");
          inst.lower = parse_expr_at(at, value, "lower objective");
          has_lower = true;
          lower_at = at;
        } else {
          at.fail("unknown objective '" + key + "'");
        }
        break;
      }
      case Section::kAnalysis: {
        if (key == "tolerance") {
          inst.analysis.tolerance = parse_number_at(at, value, "tolerance");
          if (!(inst.analysis.tolerance >= 0.0))
            at.fail("tolerance must be nonnegative");
        } else if (key == "radii") {
          inst.analysis.radii.clear();
          for (const std::string& r : split_top_commas(value)) {
            inst.analysis.radii.push_back(parse_number_at(at, r, "radius"));
          }
          radii_declared = true;
          for (std::size_t k = 0; k < inst.analysis.radii.size(); ++k) {
            const double r = inst.analysis.radii[k];
            if (!(r > 0.0) || !std::isfinite(r))
              at.fail("radii must be positive and finite");
            if (k > 0 && r <= inst.analysis.radii[k - 1])
              at.fail("radii must be strictly increasing");
          }
        } else if (key == "psi") {
          if (value == "grid") inst.analysis.psi = PsiBackend::kGrid;
          else if (value == "symbolic")
            inst.analysis.psi = PsiBackend::kSymbolic;
          else at.fail("psi must be 'grid' or 'symbolic'");
          inst.analysis.psi_declared = true;
        } else if (key == "concepts") {
          inst.analysis.concepts.clear();
          if (value != "all") {
            for (const std::string& c : split_top_commas(value)) {
              bool known = false;
              for (const std::string& k : known_concepts()) known |= (k == c);
              if (!known) at.fail("unknown concept '" + c + "'");
              inst.analysis.concepts.push_back(c);
            }
          }
        } else if (key == "asserts") {
          for (const std::string& a : split_top_commas(value)) {
            if (!is_ident(a)) at.fail("invalid assert name '" + a + "'");
            inst.analysis.asserts.push_back(a);
          }
        } else if (key == "spne") {
          if (value != "none") at.fail("spne only accepts 'none'");
          inst.analysis.no_equilibrium_declared = true;
        } else {
          at.fail("unknown analysis key '" + key + "'");
        }
        break;
      }
      default:
        at.fail("unexpected line");
    }
  }

  FileCursor eof{filename, at.line};
  if (!has_name) {
    // File stem: strip directories and one extension.
    std::string stem = filename;
    const std::size_t slash = stem.find_last_of('/');
    if (slash != std::string::npos) stem.erase(0, slash + 1);
    const std::size_t dot = stem.find_last_of('.');
    if (dot != std::string::npos && dot > 0) stem.erase(dot);
    inst.name = stem;
  }
  if (inst.leader.empty()) eof.fail("no [leader] dimensions declared");
  if (inst.follower.empty()) eof.fail("no [follower] dimensions declared");
  if (inst.leader.size() > 2) eof.fail("at most 2 leader dimensions");
  if (inst.follower.size() > 2) eof.fail("at most 2 follower dimensions");
  if (!has_upper) eof.fail("missing 'upper' objective");
  if (!has_lower) eof.fail("missing 'lower' objective");

  // Environment: leader then follower names, all distinct.
  for (const LeaderDim& d : inst.leader) inst.env.push_back(d.name);
  for (const FollowerDim& d : inst.follower) inst.env.push_back(d.name);
  for (std::size_t i = 0; i < inst.env.size(); ++i) {
    for (std::size_t j = i + 1; j < inst.env.size(); ++j) {
      if (inst.env[i] == inst.env[j])
        eof.fail("duplicate dimension name '" + inst.env[i] + "'");
    }
  }
  std::vector<std::string> leader_names;
  for (const LeaderDim& d : inst.leader) leader_names.push_back(d.name);

  auto check_env = [&](const Expr& e, const std::vector<std::string>& env,
                       const FileCursor& where, const std::string& what) {
    for (const std::string& n : e.names()) {
      bool ok = false;
      for (const std::string& v : env) ok |= (v == n);
      if (!ok)
        where.fail(what + " references unknown variable '" + n + "'");
    }
  };
  check_env(inst.upper, inst.env, upper_at, "upper objective");
  check_env(inst.lower, inst.env, lower_at, "lower objective");
  if (inst.require) check_env(*inst.require, inst.env, eof, "require");
  for (std::size_t i = 0; i < inst.follower.size(); ++i) {
    check_env(inst.follower[i].lo, leader_names, follower_at[i],
              "follower bound");
    check_env(inst.follower[i].hi, leader_names, follower_at[i],
              "follower bound");
    for (const Expr& p : inst.follower[i].declared_points) {
      check_env(p, leader_names, follower_at[i], "follower point");
    }
  }
  for (std::size_t i = 0; i < inst.psi.size(); ++i) {
    const PsiPiece& piece = inst.psi[i];
    if (piece.condition)
      check_env(*piece.condition, leader_names, psi_at[i],
                "solution-map condition");
    for (const PsiSetPiece& p : piece.set) {
      check_env(p.lo, leader_names, psi_at[i], "solution-map endpoint");
      check_env(p.hi, leader_names, psi_at[i], "solution-map endpoint");
    }
  }
  if (inst.analysis.psi == PsiBackend::kSymbolic && inst.psi.empty())
    eof.fail("psi = symbolic requires a [psi] block");
  if (saw_psi_block && !inst.analysis.psi_declared) {
    inst.analysis.psi = PsiBackend::kSymbolic;
    inst.analysis.psi_declared = true;
  }

  // Inject piecewise breakpoints as mandatory grid points: constants for
  // leader dimensions, leader-only expressions for follower dimensions.
  std::vector<const Expr*> sources = {&inst.upper, &inst.lower};
  if (inst.require) sources.push_back(&*inst.require);
  for (const PsiPiece& piece : inst.psi) {
    if (piece.condition) sources.push_back(&*piece.condition);
  }
  auto names_subset = [](const Expr& owner, std::int32_t node,
                         const std::vector<std::string>& allowed) {
    const Expr sub = owner.subtree(node);
    for (const std::string& n : sub.names()) {
      bool ok = false;
      for (const std::string& a : allowed) ok |= (a == n);
      if (!ok) return false;
    }
    return true;
  };
  for (const Expr* src : sources) {
    for (const Threshold& th : thresholds(*src)) {
      for (LeaderDim& d : inst.leader) {
        if (th.var != d.name || !names_subset(*src, th.value_node, {}))
          continue;
        const Expr value = src->subtree(th.value_node);
        const BoundExpr b(&value, {});
        double v;
        try {
          v = b.evaluate({});
        } catch (const EvalError&) {
          continue;
        }
        bool present = false;
        for (double m : d.mandatory) present |= (m == v);
        if (!present && std::isfinite(v)) d.mandatory.push_back(v);
      }
      for (FollowerDim& d : inst.follower) {
        if (th.var != d.name || !names_subset(*src, th.value_node, leader_names))
          continue;
        const Expr value = src->subtree(th.value_node);
        bool present = false;
        for (const Expr& m : d.mandatory) present |= m.same_structure(value);
        if (!present) d.mandatory.push_back(value);
      }
    }
  }
  // Declared solution-map endpoints also land on follower grids.
  if (!inst.follower.empty()) {
    FollowerDim& d0 = inst.follower.front();
    for (const PsiPiece& piece : inst.psi) {
      for (const PsiSetPiece& p : piece.set) {
        for (const Expr* endp : {&p.lo, &p.hi}) {
          bool present = false;
          for (const Expr& m : d0.mandatory) present |= m.same_structure(*endp);
          if (!present) d0.mandatory.push_back(*endp);
        }
      }
    }
  }

  // Leader grid must build and stay within the size cap.
  std::size_t grid_size = 1;
  for (std::size_t d = 0; d < inst.leader.size(); ++d) {
    std::vector<double> axis;
    try {
      axis = leader_axis(inst, d);
    } catch (const Error& e) {
      leader_at[d].fail(e.what());
    }
    if (axis.size() > kMaxGridPoints / grid_size)
      leader_at[d].fail("leader grid exceeds the point limit");
    grid_size *= axis.size();
  }

  // Local radii must exceed the leader resolution (product-norm balls
  // smaller than one step see no neighbors). Declared schedules are
  // validated; the default schedule adapts to coarse grids instead.
  double max_step = 0.0, diameter = 0.0;
  for (const LeaderDim& d : inst.leader) {
    max_step = std::max(max_step, d.step);
    diameter += d.hi - d.lo;
  }
  if (radii_declared) {
    for (double r : inst.analysis.radii) {
      if (r <= max_step) {
        eof.fail("radius " + format_shortest(r) +
                 " does not exceed the leader grid step");
      }
    }
    if (diameter > 0.0) {
      bool usable = false;
      for (double r : inst.analysis.radii) usable |= (r < diameter);
      if (!usable)
        eof.fail("no radius lies strictly below the leader domain diameter");
    }
  } else {
    std::vector<double> fitted;
    for (double r : inst.analysis.radii) {
      if (r > max_step && (diameter == 0.0 || r < diameter)) {
        fitted.push_back(r);
      }
    }
    if (fitted.empty()) fitted.push_back(2.0 * max_step);
    inst.analysis.radii = std::move(fitted);
  }

  const auto grid = leader_grid(inst);
  for (std::size_t d = 0; d < inst.follower.size(); ++d) {
    const FollowerDim& dim = inst.follower[d];
    const BoundExpr blo(&dim.lo, inst.env);
    const BoundExpr bhi(&dim.hi, inst.env);
    for (const auto& x : grid) {
      double lo, hi;
      try {
        lo = blo.evaluate(x);
        hi = bhi.evaluate(x);
      } catch (const Error& e) {
        follower_at[d].fail(std::string("follower bound: ") + e.what());
      }
      if (std::isnan(lo) || std::isnan(hi) || lo > hi)
        throw InfeasibleFollowerError(point_label(x));
    }
  }

  return inst;
}

BilevelInstance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("Io", "file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_instance_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// Printing

std::string print_instance(const BilevelInstance& inst) {
  std::string out = "name = " + inst.name + "\n\n[leader]\n";
  for (const LeaderDim& d : inst.leader) {
    out += d.name + " = " + format_shortest(d.lo) + " .. " +
           format_shortest(d.hi) + " step " + format_shortest(d.step);
    for (std::size_t k = 0; k < d.declared_points.size(); ++k) {
      out += k == 0 ? " points " : ", ";
      out += format_shortest(d.declared_points[k]);
    }
    out += "\n";
  }
  out += "\n[follower]\n";
  for (const FollowerDim& d : inst.follower) {
    out += d.name + " = " + d.lo.to_string() + " .. " + d.hi.to_string();
    if (d.has_step) out += " step " + format_shortest(d.step);
    for (std::size_t k = 0; k < d.declared_points.size(); ++k) {
      out += k == 0 ? " points " : ", ";
      out += d.declared_points[k].to_string();
    }
    out += "\n";
  }
  if (inst.require) out += "require = " + inst.require->to_string() + "\n";
  out += "\n[objectives]\nupper = " + inst.upper.to_string() +
         "\nlower = " + inst.lower.to_string() + "\n";
  if (!inst.psi.empty()) {
    out += "\n[psi]\n";
    for (const PsiPiece& piece : inst.psi) {
      if (piece.condition) {
        out += "when " + piece.condition->to_string() + " -> ";
      } else {
        out += "else -> ";
      }
      out += print_psi_set(piece.set) + "\n";
    }
  }
  out += "\n[analysis]\ntolerance = " +
         format_shortest(inst.analysis.tolerance) + "\nradii = ";
  for (std::size_t k = 0; k < inst.analysis.radii.size(); ++k) {
    if (k) out += ", ";
    out += format_shortest(inst.analysis.radii[k]);
  }
  out += "\n";
  if (inst.analysis.psi_declared) {
    out += std::string("psi = ") +
           (inst.analysis.psi == PsiBackend::kGrid ? "grid" : "symbolic") +
           "\n";
  }
  if (!inst.analysis.concepts.empty()) {
    out += "concepts = ";
    for (std::size_t k = 0; k < inst.analysis.concepts.size(); ++k) {
      if (k) out += ", ";
      out += inst.analysis.concepts[k];
    }
    out += "\n";
  }
  if (!inst.analysis.asserts.empty()) {
    out += "asserts = ";
    for (std::size_t k = 0; k < inst.analysis.asserts.size(); ++k) {
      if (k) out += ", ";
      out += inst.analysis.asserts[k];
    }
    out += "\n";
  }
  if (inst.analysis.no_equilibrium_declared) out += "spne = none\n";
  return out;
}

// ---------------------------------------------------------------------------
// Grids

std::vector<double> leader_axis(const BilevelInstance& inst, std::size_t dim) {
  const LeaderDim& d = inst.leader[dim];
  return build_axis(d.lo, d.hi, d.step, d.mandatory);
}

std::vector<std::vector<double>> leader_grid(const BilevelInstance& inst) {
  std::vector<std::vector<double>> axes;
  for (std::size_t d = 0; d < inst.leader.size(); ++d) {
    axes.push_back(leader_axis(inst, d));
  }
  std::vector<std::vector<double>> out;
  if (axes.size() == 1) {
    out.reserve(axes[0].size());
    for (double v : axes[0]) out.push_back({v});
  } else {
    out.reserve(axes[0].size() * axes[1].size());
    for (double a : axes[0]) {
      for (double b : axes[1]) out.push_back({a, b});
    }
  }
  return out;
}

std::vector<double> follower_axis(const BilevelInstance& inst, std::size_t dim,
                                  std::span<const double> x) {
  const FollowerDim& d = inst.follower[dim];
  const BoundExpr blo(&d.lo, inst.env);
  const BoundExpr bhi(&d.hi, inst.env);
  const double lo = blo.evaluate(x);
  const double hi = bhi.evaluate(x);
  if (lo > hi) throw InfeasibleFollowerError(point_label(x));
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw Error("GridUnavailable",
                "follower bounds are unbounded at x = " + point_label(x) +
                    "; use the symbolic backend");
  if (!d.has_step)
    throw Error("GridUnavailable",
                "follower dimension '" + d.name + "' declares no step");
  std::vector<double> mand;
  mand.reserve(d.mandatory.size());
  for (const Expr& m : d.mandatory) {
    const BoundExpr bm(&m, inst.env);
    const double v = bm.evaluate(x);
    if (std::isfinite(v)) mand.push_back(v);
  }
  return build_axis(lo, hi, d.step, mand);
}

std::vector<std::vector<double>> follower_points(const BilevelInstance& inst,
                                                 std::span<const double> x) {
  std::vector<std::vector<double>> axes;
  std::size_t total = 1;
  for (std::size_t d = 0; d < inst.follower.size(); ++d) {
    axes.push_back(follower_axis(inst, d, x));
    if (axes.back().size() > kMaxGridPoints / total)
      throw Error("GridLimit",
                  "follower grid exceeds the point limit at x = " +
                      point_label(x));
    total *= axes.back().size();
  }
  std::vector<std::vector<double>> out;
  std::vector<double> slots(inst.env.size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) slots[k] = x[k];
  const std::size_t base = inst.leader.size();
  std::optional<BoundExpr> pred;
  if (inst.require) pred.emplace(&*inst.require, inst.env);

  auto emit = [&](const std::vector<double>& y) {
    if (pred) {
      for (std::size_t k = 0; k < y.size(); ++k) slots[base + k] = y[k];
      if (pred->evaluate(slots) == 0.0) return;
    }
    out.push_back(y);
  };
  if (axes.size() == 1) {
    for (double v : axes[0]) emit({v});
  } else {
    for (double a : axes[0]) {
      for (double b : axes[1]) emit({a, b});
    }
  }
  if (out.empty()) throw InfeasibleFollowerError(point_label(x));
  return out;
}

std::string point_label(std::span<const double> x) {
  std::string out = "(";
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (k) out += ", ";
    out += format_shortest(x[k]);
  }
  out += ")";
  return out;
}

}  // namespace bilevel
