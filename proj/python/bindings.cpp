// SPDX-License-Identifier: Apache-2.0
//
// Python module exposing the main operations: exact set algebra with both
// set orders, and the five document-producing analyses (solve, relations,
// game, robust, verify). Documents come back as canonical JSON strings --
// byte-identical to the command-line output for the same input.
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "bilevel/errors.hpp"
#include "bilevel/games.hpp"
#include "bilevel/lower.hpp"
#include "bilevel/model.hpp"
#include "bilevel/report.hpp"
#include "bilevel/robust.hpp"
#include "bilevel/setreal.hpp"
#include "bilevel/solutions.hpp"
#include "bilevel/verify.hpp"

namespace py = pybind11;

namespace {

using namespace bilevel;

int pick_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string solve_file(const std::string& path, int threads) {
  const BilevelInstance inst = load_instance_file(path);
  const FamilyResult family = image_family(inst, pick_threads(threads));
  const SolutionsReport sol = solve_concepts(inst, family);
  return render_json(concept_report_json(inst, family, sol));
}

std::string relations_file(const std::string& path, int threads) {
  const BilevelInstance inst = load_instance_file(path);
  const FamilyResult family = image_family(inst, pick_threads(threads));
  return render_json(relations_json(inst, family));
}

std::string game_file(const std::string& path, int threads) {
  if (std::filesystem::path(path).extension() == ".game")
    return render_json(game_report_json(correspondence_report(
        load_game_file(path))));
  const BilevelInstance inst = load_instance_file(path);
  if (!inst.analysis.no_equilibrium_declared)
    throw Error("Usage",
                "problem file does not declare 'spne = none'; 'game' expects "
                "a game tree (.game) or that declaration");
  const FamilyResult family = image_family(inst, pick_threads(threads));
  const SolutionsReport sol = solve_concepts(inst, family);
  return render_json(no_equilibrium_report_json(inst, family, sol));
}

std::string robust_file(const std::string& path) {
  const UncertainProblem p = load_uncertain_file(path);
  return render_json(robust_report_json(p, check_equivalence(p)));
}

std::string verify_directory_py(const std::string& path, int threads) {
  return render_json(
      verification_json(verify_directory(path, pick_threads(threads))));
}

py::tuple extremum_tuple(const Extremum& e) {
  return py::make_tuple(e.value, e.attained);
}

}  // namespace

PYBIND11_MODULE(bilevelsets, m) {
  m.doc() =
      "Exact interval-union set algebra and set-valued solution concepts "
      "for two-level optimization problems.";

  py::register_exception<Error>(m, "EngineError");

  py::class_<RealSet>(m, "Set",
                      "Canonical finite union of intervals over the extended "
                      "reals; always nonempty, endpoints compared exactly.")
      .def_static("parse", &RealSet::parse, py::arg("text"),
                  "Parse a canonical set string such as \"[0,1) u {2}\".")
      .def_static("point", &RealSet::point, py::arg("value"))
      .def_static("interval", &RealSet::interval, py::arg("lo"),
                  py::arg("lo_closed"), py::arg("hi"), py::arg("hi_closed"))
      .def("__str__", &RealSet::to_string)
      .def("__repr__",
           [](const RealSet& s) {
             return "Set.parse('" + s.to_string() + "')";
           })
      .def(
          "__eq__",
          [](const RealSet& a, const RealSet& b) { return a == b; },
          py::is_operator())
      .def("inf",
           [](const RealSet& s) { return extremum_tuple(s.inf()); },
           "(value, attained) of the greatest lower bound.")
      .def("sup",
           [](const RealSet& s) { return extremum_tuple(s.sup()); },
           "(value, attained) of the least upper bound.")
      .def("contains", &RealSet::contains, py::arg("value"))
      .def("distance", &RealSet::distance, py::arg("value"),
           "Shortest distance from the value to the set's closure.")
      .def("closed_in_reals", &RealSet::closed_in_reals);

  m.def("leq_l", &leq_l, py::arg("a"), py::arg("b"),
        "Lower set order: a + [0, inf) covers b.");
  m.def("leq_u", &leq_u, py::arg("a"), py::arg("b"),
        "Upper set order: b - [0, inf) covers a.");
  m.def("negate", &negate, py::arg("a"), "Elementwise negation of the set.");
  m.def(
      "minimal_members",
      [](const std::vector<RealSet>& family, const std::string& order) {
        if (order != "l" && order != "u")
          throw Error("Usage", "order must be 'l' or 'u'");
        return minimal_members(family, order == "l" ? leq_l : leq_u);
      },
      py::arg("family"), py::arg("order"),
      "Indices of the members minimal under the chosen set order ('l' or "
      "'u'); mutually-equivalent members all count as minimal.");

  m.def("solve_file", &solve_file, py::arg("path"), py::arg("threads") = 0,
        "Solve a problem file; returns the concept report as canonical "
        "JSON.");
  m.def("relations_file", &relations_file, py::arg("path"),
        py::arg("threads") = 0,
        "Pairwise set-order table of the image family as canonical JSON.");
  m.def("game_file", &game_file, py::arg("path"), py::arg("threads") = 0,
        "Equilibrium/translation report for a .game tree, or the declared "
        "no-equilibrium report for a problem file with 'spne = none'.");
  m.def("robust_file", &robust_file, py::arg("path"),
        "Robust counterpart tables plus reformulation agreement as "
        "canonical JSON.");
  m.def("verify_directory", &verify_directory_py, py::arg("path"),
        py::arg("threads") = 0,
        "Check every fixture in a directory against its golden document and "
        "the implication matrix; returns the verification report as "
        "canonical JSON.");
}
