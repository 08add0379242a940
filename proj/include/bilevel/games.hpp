// Two-stage extensive-form games: backward-induction equilibria, the
// translation into a finite two-level instance, and reports on how the two
// views line up move by move.
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bilevel/lower.hpp"
#include "bilevel/model.hpp"
#include "bilevel/solutions.hpp"

namespace bilevel {

// A finite two-stage game: the first player commits to a move, the second
// replies from a move-dependent menu, and each pair of choices costs both
// players something.
struct GameTree {
  std::string name;
  std::string source_file;
  std::vector<std::string> leader_moves;                    // order of appearance
  std::vector<std::vector<std::string>> follower_moves;     // per leader move
  std::vector<std::vector<std::pair<double, double>>> costs;  // (leader, follower)
};

// Line format: "move -> reply : leader_cost, follower_cost", one leaf per
// line, plus an optional "name = ..." header and '#' comments.
GameTree load_game_text(const std::string& text,
                        const std::string& filename = "<inline>");
GameTree load_game_file(const std::string& path);

// First-player move plus a full reply policy (one reply index per move).
struct StrategyProfile {
  std::size_t x = 0;
  std::vector<std::size_t> policy;

  friend bool operator==(const StrategyProfile&,
                         const StrategyProfile&) = default;
};
std::string profile_label(const GameTree& g, const StrategyProfile& p);

// All subgame-perfect profiles: the policy replies optimally at every move
// (every tie-breaking enumerated), and the move is optimal against the
// policy. Sorted by move, then policy.
std::vector<StrategyProfile> spne_enumerate(const GameTree& g);

// The same game as a finite two-level instance: moves become integer grid
// codes, menus become move-dependent follower bounds, costs become
// piecewise objectives.
BilevelInstance to_bilevel(const GameTree& g);

// One concept member and the equilibria that share its leader move.
struct MoveMatch {
  std::string concept_name;
  std::size_t move = 0;
  std::vector<std::size_t> spne;  // indices into CorrespondenceReport::spne
};

struct CorrespondenceReport {
  GameTree tree;
  std::vector<StrategyProfile> spne;
  FamilyResult family;        // of the translated instance
  SolutionsReport solutions;  // concepts of the translated instance
  std::vector<MoveMatch> matches;
  // Equilibria whose move appears in neither the optimistic nor the
  // pessimistic argmin of the translation.
  std::vector<std::size_t> unmatched_spne;
};
CorrespondenceReport correspondence_report(const GameTree& g);

}  // namespace bilevel
