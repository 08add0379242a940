// SPDX-License-Identifier: Apache-2.0
#include "bilevel/report.hpp"

#include <cmath>
#include <sstream>

#include "bilevel/errors.hpp"
#include "bilevel/numfmt.hpp"
#include "bilevel/setreal.hpp"

namespace bilevel {
namespace {

void escape_to(std::ostream& out, const std::string& s) {
  out << '"';
  for (char c : s) {
    switch (c) {
      case '"': out << "\\\""; break;
      case '\\': out << "\\\\"; break;
      case '\b': out << "\\b"; break;
      case '\f': out << "\\f"; break;
      case '\n': out << "\\n"; break;
      case '\r': out << "\\r"; break;
      case '\t': out << "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out << buf;
        } else {
          out << c;
        }
    }
  }
  out << '"';
}

void number_to(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "\"nan\"";
  } else if (std::isinf(v)) {
    out << (v > 0 ? "\"inf\"" : "\"-inf\"");
  } else {
    out << format_report(v);
  }
}

void write_json(std::ostream& out, const Json& j, int depth) {
  const std::string pad(2 * static_cast<std::size_t>(depth), ' ');
  const std::string inner(2 * static_cast<std::size_t>(depth + 1), ' ');
  switch (j.type()) {
    case Json::value_t::null: out << "null"; break;
    case Json::value_t::boolean: out << (j.get<bool>() ? "true" : "false"); break;
    case Json::value_t::string: escape_to(out, j.get<std::string>()); break;
    case Json::value_t::number_integer: out << j.get<std::int64_t>(); break;
    case Json::value_t::number_unsigned: out << j.get<std::uint64_t>(); break;
    case Json::value_t::number_float: number_to(out, j.get<double>()); break;
    case Json::value_t::array: {
      if (j.empty()) { out << "[]"; break; }
      out << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out << inner;
        write_json(out, j[i], depth + 1);
        out << (i + 1 < j.size() ? ",\n" : "\n");
      }
      out << pad << ']';
      break;
    }
    case Json::value_t::object: {
      if (j.empty()) { out << "{}"; break; }
      out << "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out << inner;
        escape_to(out, it.key());
        out << ": ";
        write_json(out, it.value(), depth + 1);
        out << (i + 1 < j.size() ? ",\n" : "\n");
      }
      out << pad << '}';
      break;
    }
    default: out << "null";
  }
}

std::string scalar_text(const Json& j) {
  std::ostringstream out;
  switch (j.type()) {
    case Json::value_t::null: out << "null"; break;
    case Json::value_t::boolean: out << (j.get<bool>() ? "true" : "false"); break;
    case Json::value_t::string: out << j.get<std::string>(); break;
    case Json::value_t::number_integer: out << j.get<std::int64_t>(); break;
    case Json::value_t::number_unsigned: out << j.get<std::uint64_t>(); break;
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isnan(v)) out << "nan";
      else if (std::isinf(v)) out << (v > 0 ? "inf" : "-inf");
      else out << format_report(v);
      break;
    }
    default: break;
  }
  return out.str();
}

bool is_scalar(const Json& j) { return !j.is_array() && !j.is_object(); }

// Inline form for small scalar arrays, e.g. a point "(0.5, 1)".
bool inline_array(const Json& j) {
  if (!j.is_array()) return false;
  for (const Json& v : j)
    if (!is_scalar(v)) return false;
  return true;
}

void write_text(std::ostream& out, const Json& j, int depth) {
  const std::string pad(2 * static_cast<std::size_t>(depth), ' ');
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      out << pad << it.key() << ':';
      const Json& v = it.value();
      if (is_scalar(v)) {
        out << ' ' << scalar_text(v) << '\n';
      } else if (v.empty()) {
        out << (v.is_array() ? " []" : " {}") << '\n';
      } else if (inline_array(v)) {
        out << ' ';
        for (std::size_t i = 0; i < v.size(); ++i)
          out << (i ? ", " : "") << scalar_text(v[i]);
        out << '\n';
      } else {
        out << '\n';
        write_text(out, v, depth + 1);
      }
    }
    return;
  }
  if (j.is_array()) {
    for (const Json& v : j) {
      if (is_scalar(v)) {
        out << pad << "- " << scalar_text(v) << '\n';
      } else if (inline_array(v)) {
        out << pad << "- ";
        for (std::size_t i = 0; i < v.size(); ++i)
          out << (i ? ", " : "") << scalar_text(v[i]);
        out << '\n';
      } else {
        out << pad << "-\n";
        write_text(out, v, depth + 1);
      }
    }
    return;
  }
  out << pad << scalar_text(j) << '\n';
}

Json extremum_json(const Extremum& e) {
  Json j = Json::object();
  j["value"] = e.value;
  j["attained"] = e.attained;
  return j;
}

Json points_json(const std::vector<std::vector<double>>& grid,
                 const std::vector<std::size_t>& idx) {
  Json arr = Json::array();
  for (std::size_t i : idx) arr.push_back(point_json(grid[i]));
  return arr;
}

Json x_concept_json(const XConcept& c,
                    const std::vector<std::vector<double>>& grid) {
  Json j = Json::object();
  j["global"] = points_json(grid, c.global);
  Json local = Json::array();
  for (const LocalX& lx : c.local) {
    Json e = Json::object();
    e["x"] = point_json(grid[lx.index]);
    e["radius"] = lx.radius;
    e["strict"] = lx.strict;
    local.push_back(std::move(e));
  }
  j["local"] = std::move(local);
  j["note"] = c.note;
  return j;
}

// Standard pairs carry a response witness y; vector members are (x, z)
// points of the union image, so they carry the value alone.
Json pair_member_json(const PairMember& m,
                      const std::vector<std::vector<double>>& grid,
                      bool value_pair) {
  Json e = Json::object();
  e["x"] = point_json(grid[m.index]);
  if (value_pair) {
    e["z"] = m.value;
  } else {
    e["y"] = m.y.empty() ? Json() : point_json(m.y);
    e["value"] = m.value;
  }
  return e;
}

Json pair_concept_json(const PairConcept& c,
                       const std::vector<std::vector<double>>& grid,
                       bool value_pair = false) {
  Json j = Json::object();
  Json global = Json::array();
  for (const PairMember& m : c.global)
    global.push_back(pair_member_json(m, grid, value_pair));
  j["global"] = std::move(global);
  Json local = Json::array();
  for (const LocalPair& lp : c.local) {
    Json e = pair_member_json(lp.member, grid, value_pair);
    e["radius"] = lp.radius;
    local.push_back(std::move(e));
  }
  j["local"] = std::move(local);
  j["note"] = c.note;
  return j;
}

Json concepts_json(const FamilyResult& family, const SolutionsReport& sol) {
  auto computed = [&](const char* name) {
    for (const std::string& s : sol.computed)
      if (s == name) return true;
    return false;
  };
  Json c = Json::object();
  if (computed("real_optimistic"))
    c["real_optimistic"] = x_concept_json(sol.real_optimistic, family.grid);
  if (computed("real_pessimistic"))
    c["real_pessimistic"] = x_concept_json(sol.real_pessimistic, family.grid);
  if (computed("standard_optimistic"))
    c["standard_optimistic"] =
        pair_concept_json(sol.standard_optimistic, family.grid);
  if (computed("l_minimal"))
    c["l_minimal"] = x_concept_json(sol.l_minimal, family.grid);
  if (computed("u_minimal"))
    c["u_minimal"] = x_concept_json(sol.u_minimal, family.grid);
  if (computed("vector"))
    c["vector"] = pair_concept_json(sol.vector_optimal, family.grid, true);
  return c;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

std::string point_cell(std::span<const double> p) {
  if (p.size() == 1) return format_report(p[0]);
  return point_label(p);
}

}  // namespace

std::string render_json(const Json& doc) {
  std::ostringstream out;
  write_json(out, doc, 0);
  out << '\n';
  return out.str();
}

std::string render_text(const Json& doc) {
  std::ostringstream out;
  write_text(out, doc, 0);
  return out.str();
}

Json point_json(std::span<const double> p) {
  if (p.size() == 1) return Json(p[0]);
  Json arr = Json::array();
  for (double v : p) arr.push_back(v);
  return arr;
}

Json concept_report_json(const BilevelInstance& inst,
                         const FamilyResult& family,
                         const SolutionsReport& sol) {
  Json doc = Json::object();
  doc["kind"] = "concept-report";
  doc["name"] = inst.name;
  doc["backend"] =
      inst.analysis.psi == PsiBackend::kSymbolic ? "symbolic" : "grid";
  doc["tolerance"] = inst.analysis.tolerance;
  Json radii = Json::array();
  for (double r : inst.analysis.radii) radii.push_back(r);
  doc["radii"] = std::move(radii);

  Json values = Json::object();
  values["optimistic"] = extremum_json(sol.optimistic_value);
  values["pessimistic"] = extremum_json(sol.pessimistic_value);
  doc["values"] = std::move(values);

  Json att = Json::object();
  att["optimistic_argmin"] = points_json(family.grid, sol.attainment.q);
  att["optimistic_attained"] = points_json(family.grid, sol.attainment.t);
  att["pessimistic_argmin"] = points_json(family.grid, sol.attainment.q_hat);
  att["pessimistic_attained"] = points_json(family.grid, sol.attainment.t_hat);
  doc["attainment"] = std::move(att);

  doc["concepts"] = concepts_json(family, sol);

  Json fam = Json::array();
  for (const PsiResult& r : family.results) {
    Json e = Json::object();
    e["x"] = point_json(r.x);
    if (r.psi.has_value()) {
      e["psi"] = r.psi->to_string();
    } else {
      e["psi"] = Json();
      Json pts = Json::array();
      for (const auto& p : r.psi_points) pts.push_back(point_json(p));
      e["psi_points"] = std::move(pts);
    }
    e["image"] = r.image.has_value() ? Json(r.image->to_string()) : Json();
    e["inf"] = extremum_json(r.inf_F);
    e["sup"] = extremum_json(r.sup_F);
    fam.push_back(std::move(e));
  }
  doc["family"] = std::move(fam);
  return doc;
}

Json relations_json(const BilevelInstance& inst, const FamilyResult& family) {
  const std::size_t n = family.grid.size();
  if (n > 256)
    throw Error("GridLimit",
                "the pairwise order table needs " + std::to_string(n) +
                    " grid points; at most 256 are supported (coarsen the "
                    "grid with --grid-step)");
  Json doc = Json::object();
  doc["kind"] = "relations";
  doc["name"] = inst.name;
  Json pts = Json::array();
  for (const auto& x : family.grid) pts.push_back(point_json(x));
  doc["points"] = std::move(pts);
  Json images = Json::array();
  for (const PsiResult& r : family.results)
    images.push_back(r.image.has_value() ? Json(r.image->to_string()) : Json());
  doc["images"] = std::move(images);

  Json lower = Json::array(), upper = Json::array();
  for (std::size_t i = 0; i < n; ++i) {
    Json lrow = Json::array(), urow = Json::array();
    for (std::size_t j = 0; j < n; ++j) {
      lrow.push_back(leq_l(*family.results[i].image, *family.results[j].image));
      urow.push_back(leq_u(*family.results[i].image, *family.results[j].image));
    }
    lower.push_back(std::move(lrow));
    upper.push_back(std::move(urow));
  }
  doc["lower_leq"] = std::move(lower);
  doc["upper_leq"] = std::move(upper);
  return doc;
}

Json game_report_json(const CorrespondenceReport& rep) {
  const GameTree& g = rep.tree;
  Json doc = Json::object();
  doc["kind"] = "game-report";
  doc["name"] = g.name;
  Json moves = Json::array();
  for (const std::string& m : g.leader_moves) moves.push_back(m);
  doc["moves"] = std::move(moves);

  Json eqs = Json::array();
  for (const StrategyProfile& p : rep.spne) {
    Json e = Json::object();
    e["move"] = g.leader_moves[p.x];
    Json policy = Json::array();
    for (std::size_t i = 0; i < p.policy.size(); ++i)
      policy.push_back(g.follower_moves[i][p.policy[i]]);
    e["policy"] = std::move(policy);
    e["label"] = profile_label(g, p);
    eqs.push_back(std::move(e));
  }
  doc["equilibria"] = std::move(eqs);

  auto move_names = [&](const std::vector<std::size_t>& idx) {
    Json arr = Json::array();
    for (std::size_t i : idx) arr.push_back(g.leader_moves[i]);
    return arr;
  };
  Json concepts = Json::object();
  concepts["real_optimistic"] = move_names(rep.solutions.real_optimistic.global);
  concepts["real_pessimistic"] =
      move_names(rep.solutions.real_pessimistic.global);
  Json std_pairs = Json::array();
  for (const PairMember& m : rep.solutions.standard_optimistic.global) {
    Json e = Json::object();
    e["move"] = g.leader_moves[m.index];
    e["reply"] =
        g.follower_moves[m.index][static_cast<std::size_t>(m.y.at(0))];
    e["value"] = m.value;
    std_pairs.push_back(std::move(e));
  }
  concepts["standard_optimistic"] = std::move(std_pairs);
  concepts["l_minimal"] = move_names(rep.solutions.l_minimal.global);
  concepts["u_minimal"] = move_names(rep.solutions.u_minimal.global);
  doc["concepts"] = std::move(concepts);

  Json matches = Json::array();
  for (const MoveMatch& m : rep.matches) {
    Json e = Json::object();
    e["concept"] = m.concept_name;
    e["move"] = g.leader_moves[m.move];
    Json idx = Json::array();
    for (std::size_t k : m.spne) idx.push_back(k);
    e["equilibria"] = std::move(idx);
    matches.push_back(std::move(e));
  }
  doc["matches"] = std::move(matches);

  Json unmatched = Json::array();
  for (std::size_t k : rep.unmatched_spne) unmatched.push_back(k);
  doc["unmatched_equilibria"] = std::move(unmatched);

  // The claim that every pessimistic argmin move appears in some equilibrium
  // is checked empirically; any counterexample is listed here.
  Json missing = Json::array();
  for (std::size_t i : rep.solutions.real_pessimistic.global) {
    bool seen = false;
    for (const StrategyProfile& p : rep.spne) seen = seen || p.x == i;
    if (!seen) missing.push_back(g.leader_moves[i]);
  }
  doc["pessimistic_moves_without_equilibrium"] = std::move(missing);
  return doc;
}

Json no_equilibrium_report_json(const BilevelInstance& inst,
                                const FamilyResult& family,
                                const SolutionsReport& sol) {
  Json doc = Json::object();
  doc["kind"] = "game-report";
  doc["name"] = inst.name;
  doc["moves"] = Json::array();
  doc["equilibria"] = Json::array();
  doc["note"] =
      "the instance declares that no subgame-perfect equilibrium exists; "
      "the solution concepts below still apply";
  doc["concepts"] = concepts_json(family, sol);
  return doc;
}

Json robust_report_json(const UncertainProblem& p, const RobustEquivalence& eq) {
  const RobustSolutionReport& r = eq.report;
  Json doc = Json::object();
  doc["kind"] = "robust-report";
  doc["name"] = p.name;
  Json s = Json::array(), u = Json::array();
  for (const auto& pt : r.s_points) s.push_back(point_json(pt));
  for (const auto& pt : r.u_points) u.push_back(point_json(pt));
  doc["decisions"] = std::move(s);
  doc["uncertainty"] = std::move(u);
  Json worst = Json::array(), best = Json::array();
  for (double v : r.worst_case) worst.push_back(v);
  for (double v : r.best_case) best.push_back(v);
  doc["worst_case"] = std::move(worst);
  doc["best_case"] = std::move(best);
  doc["minmax"] = points_json(r.s_points, r.minmax);
  doc["optimistic"] = points_json(r.s_points, r.optimistic);

  auto pts = [](const std::vector<std::vector<double>>& v) {
    Json arr = Json::array();
    for (const auto& p2 : v) arr.push_back(point_json(p2));
    return arr;
  };
  Json ref = Json::object();
  Json dummy = Json::object();
  dummy["minmax"] = pts(eq.dummy_minmax);
  dummy["optimistic"] = pts(eq.dummy_optimistic);
  ref["indifferent_lower"] = std::move(dummy);
  Json sgn = Json::object();
  sgn["minmax"] = pts(eq.signed_minmax);
  sgn["optimistic"] = pts(eq.signed_optimistic);
  ref["signed_lower"] = std::move(sgn);
  doc["reformulations"] = std::move(ref);

  Json agr = Json::object();
  agr["minmax"] = eq.minmax_agrees;
  agr["optimistic"] = eq.optimistic_agrees;
  agr["verdict"] =
      eq.minmax_agrees && eq.optimistic_agrees
          ? "all three formulations yield the same solution sets"
          : "MISMATCH: a reformulation disagrees with the direct tables";
  doc["agreement"] = std::move(agr);
  return doc;
}

std::string family_csv(const BilevelInstance& inst, const FamilyResult& family) {
  (void)inst;
  std::ostringstream out;
  out << "x,psi,image,inf,inf_attained,sup,sup_attained\n";
  for (const PsiResult& r : family.results) {
    out << csv_cell(point_cell(r.x)) << ',';
    if (r.psi.has_value()) {
      out << csv_cell(r.psi->to_string());
    } else {
      std::string pts;
      for (std::size_t i = 0; i < r.psi_points.size(); ++i)
        pts += (i ? "; " : "") + point_cell(r.psi_points[i]);
      out << csv_cell(pts);
    }
    out << ',' << csv_cell(r.image.has_value() ? r.image->to_string() : "");
    out << ',' << format_report(r.inf_F.value) << ','
        << (r.inf_F.attained ? "true" : "false");
    out << ',' << format_report(r.sup_F.value) << ','
        << (r.sup_F.attained ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace bilevel
