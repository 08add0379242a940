// SPDX-License-Identifier: Apache-2.0
//
// Canonical report documents. Every renderer is deterministic: object keys
// keep insertion order, floating-point numbers print with 17 significant
// digits, and infinities become the strings "inf"/"-inf", so identical
// inputs yield byte-identical output on every run and thread count.
#pragma once

#include <span>
#include <string>

#include "bilevel/games.hpp"
#include "bilevel/lower.hpp"
#include "bilevel/model.hpp"
#include "bilevel/robust.hpp"
#include "bilevel/solutions.hpp"
#include "json.hpp"

namespace bilevel {

using Json = nlohmann::ordered_json;

// Canonical text form of a document (2-space indent, trailing newline).
std::string render_json(const Json& doc);
// Human-readable "key: value" outline of the same document.
std::string render_text(const Json& doc);

// A leader or follower point: a bare number in one dimension, else an array.
Json point_json(std::span<const double> p);

// Full solve document: headline values, attainment split, every computed
// concept, and the per-point family table.
Json concept_report_json(const BilevelInstance& inst,
                         const FamilyResult& family,
                         const SolutionsReport& sol);

// Pairwise set-order table of the family images. Throws Error("GridLimit")
// when the grid exceeds 256 points.
Json relations_json(const BilevelInstance& inst, const FamilyResult& family);

// Equilibrium/translation document for a finite game.
Json game_report_json(const CorrespondenceReport& rep);

// Solve document for an instance declaring that no equilibrium exists: the
// translated concepts plus the declaration note.
Json no_equilibrium_report_json(const BilevelInstance& inst,
                                const FamilyResult& family,
                                const SolutionsReport& sol);

// Robust counterpart tables plus the reformulation agreement verdict.
Json robust_report_json(const UncertainProblem& p, const RobustEquivalence& eq);

// Family table as CSV (x, psi, image, extrema with attainment flags).
std::string family_csv(const BilevelInstance& inst, const FamilyResult& family);

}  // namespace bilevel
