// SPDX-License-Identifier: Apache-2.0
#include "bilevel/robust.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bilevel/errors.hpp"
#include "bilevel/lower.hpp"
#include "bilevel/numfmt.hpp"
#include "bilevel/solutions.hpp"

namespace bilevel {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
    return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  return true;
}

double parse_number(const std::string& s, const std::string& file, int line,
                    const std::string& what) {
  const std::string t = trim(s);
  double v = 0.0;
  const char* b = t.data();
  const char* e = b + t.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e || !std::isfinite(v))
    throw SchemaError(file, line,
                      "expected a finite " + what + ", got '" + t + "'");
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

// "name = lo .. hi step s" with constant endpoints.
UncertainDim parse_dim_clause(const std::string& lhs, const std::string& rhs,
                              const std::string& file, int line) {
  UncertainDim d;
  d.name = trim(lhs);
  if (!is_identifier(d.name))
    throw SchemaError(file, line, "'" + d.name + "' is not a variable name");
  const std::size_t dots = rhs.find("..");
  if (dots == std::string::npos)
    throw SchemaError(file, line, "expected 'lo .. hi step s' after '='");
  const std::size_t step_kw = rhs.find("step", dots + 2);
  if (step_kw == std::string::npos)
    throw SchemaError(file, line, "grid clause is missing 'step'");
  d.lo = parse_number(rhs.substr(0, dots), file, line, "lower bound");
  d.hi = parse_number(rhs.substr(dots + 2, step_kw - dots - 2), file, line,
                      "upper bound");
  d.step = parse_number(rhs.substr(step_kw + 4), file, line, "step");
  if (d.lo > d.hi)
    throw SchemaError(file, line, "'" + d.name + "': lower bound exceeds upper");
  if (d.step <= 0.0)
    throw SchemaError(file, line, "'" + d.name + "': step must be positive");
  return d;
}

std::vector<std::vector<double>> grid_of(const std::vector<UncertainDim>& dims) {
  std::vector<std::vector<double>> axes;
  axes.reserve(dims.size());
  for (const UncertainDim& d : dims)
    axes.push_back(build_axis(d.lo, d.hi, d.step, {}));
  std::vector<std::vector<double>> out;
  if (axes.size() == 1) {
    out.reserve(axes[0].size());
    for (double v : axes[0]) out.push_back({v});
  } else {
    out.reserve(axes[0].size() * axes[1].size());
    for (double a : axes[0])
      for (double b : axes[1]) out.push_back({a, b});
  }
  return out;
}

std::vector<std::size_t> argmin_indices(const std::vector<double>& table) {
  const double best = *std::min_element(table.begin(), table.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < table.size(); ++i)
    if (table[i] == best) out.push_back(i);
  return out;
}

// Sectioned instance text shared by all three reformulations.
std::string instance_text(const UncertainProblem& p, const std::string& name,
                          const std::string& lower_objective) {
  std::ostringstream text;
  text << "name = " << name << "\n\n[leader]\n";
  for (const UncertainDim& d : p.feasible)
    text << d.name << " = " << format_shortest(d.lo) << " .. "
         << format_shortest(d.hi) << " step " << format_shortest(d.step)
         << "\n";
  text << "\n[follower]\n";
  for (const UncertainDim& d : p.uncertainty)
    text << d.name << " = " << format_shortest(d.lo) << " .. "
         << format_shortest(d.hi) << " step " << format_shortest(d.step)
         << "\n";
  text << "\n[objectives]\n";
  text << "upper = " << p.phi.to_string() << "\n";
  text << "lower = " << lower_objective << "\n";
  return text.str();
}

std::vector<std::vector<double>> pick(
    const std::vector<std::vector<double>>& points,
    const std::vector<std::size_t>& idx) {
  std::vector<std::vector<double>> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(points[i]);
  return out;
}

}  // namespace

UncertainProblem load_uncertain_text(const std::string& text,
                                     const std::string& filename) {
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  std::string name;
  std::string phi_text;
  int phi_line = 0;
  std::vector<UncertainDim> feasible, uncertainty;

  while (std::getline(in, raw)) {
    ++line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw SchemaError(filename, line, "unterminated section header");
      section = s.substr(1, s.size() - 2);
      if (section != "objective" && section != "feasible" &&
          section != "uncertainty")
        throw SchemaError(filename, line, "unknown section '" + section + "'");
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw SchemaError(filename, line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (section.empty()) {
      if (key != "name")
        throw SchemaError(filename, line,
                          "only 'name' may appear before the first section");
      name = value;
    } else if (section == "objective") {
      if (key != "phi")
        throw SchemaError(filename, line, "the objective section sets 'phi'");
      if (!phi_text.empty())
        throw SchemaError(filename, line, "phi is declared twice");
      phi_text = value;
      phi_line = line;
    } else {
      std::vector<UncertainDim>& dims =
          section == "feasible" ? feasible : uncertainty;
      if (dims.size() == 2)
        throw SchemaError(filename, line,
                          "at most two " + section + " dimensions");
      dims.push_back(parse_dim_clause(key, value, filename, line));
    }
  }

  if (phi_text.empty())
    throw SchemaError(filename, line, "missing objective: phi is undeclared");
  if (feasible.empty())
    throw SchemaError(filename, line, "no feasible dimensions declared");
  if (uncertainty.empty())
    throw SchemaError(filename, line, "no uncertainty dimensions declared");

  UncertainProblem p;
  p.name = name.empty() ? stem_of(filename) : name;
  if (p.name == "<inline>") p.name = "uncertain";
  p.source_file = filename;
  p.feasible = std::move(feasible);
  p.uncertainty = std::move(uncertainty);
  for (const UncertainDim& d : p.feasible) p.env.push_back(d.name);
  for (const UncertainDim& d : p.uncertainty) p.env.push_back(d.name);
  for (std::size_t i = 0; i < p.env.size(); ++i)
    for (std::size_t j = i + 1; j < p.env.size(); ++j)
      if (p.env[i] == p.env[j])
        throw SchemaError(filename, line,
                          "variable '" + p.env[i] + "' is declared twice");

  try {
    p.phi = Expr::parse(phi_text);
  } catch (const Error& e) {
    throw SchemaError(filename, phi_line, std::string("phi: ") + e.what());
  }
  for (const std::string& used : p.phi.names())
    if (std::find(p.env.begin(), p.env.end(), used) == p.env.end())
      throw SchemaError(filename, phi_line,
                        "phi uses undeclared variable '" + used + "'");
  return p;
}

UncertainProblem load_uncertain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path, 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_uncertain_text(buf.str(), path);
}

RobustSolutionReport robust_report(const UncertainProblem& p) {
  RobustSolutionReport r;
  r.s_points = grid_of(p.feasible);
  r.u_points = grid_of(p.uncertainty);
  const BoundExpr phi(&p.phi, p.env);
  const std::size_t ns = p.feasible.size();
  std::vector<double> slots(p.env.size(), 0.0);
  r.worst_case.reserve(r.s_points.size());
  r.best_case.reserve(r.s_points.size());
  for (const std::vector<double>& x : r.s_points) {
    std::copy(x.begin(), x.end(), slots.begin());
    double worst = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (const std::vector<double>& xi : r.u_points) {
      std::copy(xi.begin(), xi.end(), slots.begin() + ns);
      const double v = phi.evaluate(slots);
      if (std::isnan(v))
        throw Error("UndefinedValue",
                    "objective is undefined at " + point_label(slots));
      worst = std::max(worst, v);
      best = std::min(best, v);
    }
    r.worst_case.push_back(worst);
    r.best_case.push_back(best);
  }
  r.minmax = argmin_indices(r.worst_case);
  r.optimistic = argmin_indices(r.best_case);
  return r;
}

std::vector<std::vector<double>> solve_minmax(const UncertainProblem& p) {
  const RobustSolutionReport r = robust_report(p);
  return pick(r.s_points, r.minmax);
}

std::vector<std::vector<double>> solve_optimistic(const UncertainProblem& p) {
  const RobustSolutionReport r = robust_report(p);
  return pick(r.s_points, r.optimistic);
}

BilevelInstance build_dummy_bilevel(const UncertainProblem& p) {
  return load_instance_text(instance_text(p, p.name + "-ambient", "0"),
                            p.source_file);
}

std::pair<BilevelInstance, BilevelInstance> build_signed_bilevels(
    const UncertainProblem& p) {
  const std::string phi = p.phi.to_string();
  BilevelInstance worst = load_instance_text(
      instance_text(p, p.name + "-worst", "-(" + phi + ")"), p.source_file);
  BilevelInstance best = load_instance_text(
      instance_text(p, p.name + "-best", phi), p.source_file);
  return {std::move(worst), std::move(best)};
}

RobustEquivalence check_equivalence(const UncertainProblem& p) {
  RobustEquivalence eq;
  eq.report = robust_report(p);
  {
    const BilevelInstance inst = build_dummy_bilevel(p);
    const FamilyResult fam = image_family(inst);
    const SolutionsReport sol = solve_concepts(inst, fam);
    eq.dummy_minmax = pick(fam.grid, sol.real_pessimistic.global);
    eq.dummy_optimistic = pick(fam.grid, sol.real_optimistic.global);
  }
  {
    const std::pair<BilevelInstance, BilevelInstance> built =
        build_signed_bilevels(p);
    const FamilyResult fw = image_family(built.first);
    eq.signed_minmax =
        pick(fw.grid, solve_concepts(built.first, fw).real_pessimistic.global);
    const FamilyResult fb = image_family(built.second);
    eq.signed_optimistic =
        pick(fb.grid, solve_concepts(built.second, fb).real_optimistic.global);
  }
  const std::vector<std::vector<double>> want_minmax =
      pick(eq.report.s_points, eq.report.minmax);
  const std::vector<std::vector<double>> want_optimistic =
      pick(eq.report.s_points, eq.report.optimistic);
  eq.minmax_agrees =
      eq.dummy_minmax == want_minmax && eq.signed_minmax == want_minmax;
  eq.optimistic_agrees = eq.dummy_optimistic == want_optimistic &&
                         eq.signed_optimistic == want_optimistic;
  return eq;
}

}  // namespace bilevel
