// SPDX-License-Identifier: Apache-2.0
#include "bilevel/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "bilevel/errors.hpp"
#include "bilevel/games.hpp"
#include "bilevel/lower.hpp"
#include "bilevel/numfmt.hpp"
#include "bilevel/report.hpp"
#include "bilevel/robust.hpp"
#include "bilevel/solutions.hpp"
#include "bilevel/verify.hpp"

namespace bilevel {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail_override(const std::string& flag,
                                const std::string& msg) {
  throw Error("Override", "override " + flag + ": " + msg);
}

// The first instance-level override present, for rejecting them on
// subcommands that do not load a problem file.
const char* first_override(const RunConfig& cfg) {
  if (cfg.grid_step) return "--grid-step";
  if (cfg.radii) return "--radii";
  if (cfg.tolerance) return "--tolerance";
  if (cfg.concepts) return "--concepts";
  if (cfg.psi) return "--psi";
  return nullptr;
}

void reject_overrides(const RunConfig& cfg, const std::string& where) {
  if (const char* flag = first_override(cfg))
    throw Error("Usage", std::string(flag) + " does not apply to " + where);
}

std::string render(const Json& doc, OutputFormat format) {
  return format == OutputFormat::kText ? render_text(doc) : render_json(doc);
}

// Writes the finished payload. With an output path the write is atomic:
// the payload lands in a sibling temp file that is renamed over the target,
// so an interrupted run never leaves a partial report.
void emit(const RunConfig& cfg, const std::string& payload) {
  if (cfg.output.empty()) {
    std::fwrite(payload.data(), 1, payload.size(), stdout);
    std::fflush(stdout);
    return;
  }
  fs::path target(cfg.output);
  fs::path tmp = target;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("Io", "cannot write output file: " + cfg.output);
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ec2;
    fs::remove(tmp, ec2);
    throw Error("Io", "cannot write output file: " + cfg.output + " (" +
                          ec.message() + ")");
  }
}

int run_solve(const RunConfig& cfg) {
  BilevelInstance inst = load_instance_file(cfg.input);
  apply_overrides(inst, cfg);
  const int threads = resolve_threads(cfg);
  FamilyResult family = image_family(inst, threads);
  SolutionsReport sol = solve_concepts(inst, family);
  if (cfg.format == OutputFormat::kCsv) {
    emit(cfg, family_csv(inst, family));
  } else {
    emit(cfg, render(concept_report_json(inst, family, sol), cfg.format));
  }
  return 0;
}

int run_relations(const RunConfig& cfg) {
  if (cfg.format == OutputFormat::kCsv)
    throw Error("Usage", "--format=csv is only available for 'solve'");
  BilevelInstance inst = load_instance_file(cfg.input);
  apply_overrides(inst, cfg);
  FamilyResult family = image_family(inst, resolve_threads(cfg));
  emit(cfg, render(relations_json(inst, family), cfg.format));
  return 0;
}

int run_verify(const RunConfig& cfg) {
  if (cfg.format == OutputFormat::kCsv)
    throw Error("Usage", "--format=csv is only available for 'solve'");
  reject_overrides(cfg, "'verify'");
  VerificationReport rep = verify_directory(cfg.input, resolve_threads(cfg));
  emit(cfg, render(verification_json(rep), cfg.format));
  return rep.ok ? 0 : 1;
}

int run_game(const RunConfig& cfg) {
  if (cfg.format == OutputFormat::kCsv)
    throw Error("Usage", "--format=csv is only available for 'solve'");
  if (fs::path(cfg.input).extension() == ".game") {
    reject_overrides(cfg, "a game tree input");
    GameTree g = load_game_file(cfg.input);
    emit(cfg, render(game_report_json(correspondence_report(g)), cfg.format));
    return 0;
  }
  // A problem file is admissible as a game only when it states that the
  // induced game has no subgame perfect equilibrium; the report then pairs
  // that declaration with the translated solution concepts.
  BilevelInstance inst = load_instance_file(cfg.input);
  apply_overrides(inst, cfg);
  if (!inst.analysis.no_equilibrium_declared)
    throw Error("Usage",
                "problem file does not declare 'spne = none'; 'game' expects "
                "a game tree (.game) or that declaration");
  FamilyResult family = image_family(inst, resolve_threads(cfg));
  SolutionsReport sol = solve_concepts(inst, family);
  emit(cfg, render(no_equilibrium_report_json(inst, family, sol), cfg.format));
  return 0;
}

int run_robust(const RunConfig& cfg) {
  if (cfg.format == OutputFormat::kCsv)
    throw Error("Usage", "--format=csv is only available for 'solve'");
  reject_overrides(cfg, "'robust'");
  UncertainProblem p = load_uncertain_file(cfg.input);
  RobustEquivalence eq = check_equivalence(p);
  emit(cfg, render(robust_report_json(p, eq), cfg.format));
  return (eq.minmax_agrees && eq.optimistic_agrees) ? 0 : 1;
}

// Error text for stderr. Schema errors already carry file:line; Io errors
// name the path; everything else gets the input path prefixed.
std::string context_message(const RunConfig& cfg, const Error& e) {
  if (e.kind() == "Schema" || e.kind() == "Io" || e.kind() == "Usage")
    return e.what();
  if (cfg.input.empty()) return e.what();
  return cfg.input + ": " + e.what();
}

}  // namespace

void apply_overrides(BilevelInstance& inst, const RunConfig& cfg) {
  if (cfg.grid_step) {
    const double s = *cfg.grid_step;
    if (!(s > 0.0) || !std::isfinite(s))
      fail_override("--grid-step", "step must be positive and finite");
    for (LeaderDim& d : inst.leader) d.step = s;
    for (FollowerDim& d : inst.follower) {
      d.step = s;
      d.has_step = true;
    }
  }
  if (cfg.tolerance) {
    if (!(*cfg.tolerance >= 0.0))
      fail_override("--tolerance", "tolerance must be nonnegative");
    inst.analysis.tolerance = *cfg.tolerance;
  }
  if (cfg.radii) {
    const std::vector<double>& rs = *cfg.radii;
    if (rs.empty())
      fail_override("--radii", "schedule must name at least one radius");
    for (std::size_t k = 0; k < rs.size(); ++k) {
      if (!(rs[k] > 0.0) || !std::isfinite(rs[k]))
        fail_override("--radii", "radii must be positive and finite");
      if (k > 0 && rs[k] <= rs[k - 1])
        fail_override("--radii", "radii must be strictly increasing");
    }
    inst.analysis.radii = rs;
  }
  if (cfg.concepts) {
    for (const std::string& c : *cfg.concepts) {
      bool known = false;
      for (const std::string& k : known_concepts()) known |= (k == c);
      if (!known) fail_override("--concepts", "unknown concept '" + c + "'");
    }
    inst.analysis.concepts = *cfg.concepts;
  }
  if (cfg.psi) {
    if (*cfg.psi == PsiBackend::kSymbolic && inst.psi.empty())
      fail_override("--psi", "symbolic backend requires a declared solution map");
    inst.analysis.psi = *cfg.psi;
    inst.analysis.psi_declared = true;
  }

  // A new step or radius schedule can break the loader's grid invariants:
  // re-check the size cap and the radius bounds against the updated model.
  if (cfg.grid_step || cfg.radii) {
    std::size_t grid_size = 1;
    for (std::size_t d = 0; d < inst.leader.size(); ++d) {
      std::vector<double> axis = leader_axis(inst, d);
      if (axis.size() > kMaxGridPoints / grid_size)
        fail_override("--grid-step", "leader grid exceeds the point limit");
      grid_size *= axis.size();
    }
    double max_step = 0.0, diameter = 0.0;
    for (const LeaderDim& d : inst.leader) {
      max_step = std::max(max_step, d.step);
      diameter += d.hi - d.lo;
    }
    for (double r : inst.analysis.radii) {
      if (r <= max_step)
        fail_override(cfg.radii ? "--radii" : "--grid-step",
                      "radius " + format_shortest(r) +
                          " does not exceed the leader grid step");
    }
    if (diameter > 0.0) {
      bool usable = false;
      for (double r : inst.analysis.radii) usable |= (r < diameter);
      if (!usable)
        fail_override("--radii",
                      "no radius lies strictly below the leader domain diameter");
    }
  }
}

int resolve_threads(const RunConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  unsigned n = std::thread::hardware_concurrency();
  return n > 0 ? static_cast<int>(n) : 1;
}

int execute(const RunConfig& cfg) {
  switch (cfg.subcommand) {
    case Subcommand::kSolve:
      return run_solve(cfg);
    case Subcommand::kRelations:
      return run_relations(cfg);
    case Subcommand::kVerify:
      return run_verify(cfg);
    case Subcommand::kGame:
      return run_game(cfg);
    case Subcommand::kRobust:
      return run_robust(cfg);
  }
  return 2;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "Bilevel solution-concept engine: solves two-level decision problems "
      "over finite grids, compares optimistic/pessimistic/set-order/vector "
      "solution notions, checks their cross-implications, and bridges finite "
      "games and robust counterparts onto the same machinery."};
  app.require_subcommand(1);
  app.fallthrough();

  double grid_step = 0.0, tolerance = 0.0;
  std::vector<double> radii;
  std::vector<std::string> concepts;
  std::string psi, format = "json", output;
  int threads = 0;

  CLI::Option* o_step =
      app.add_option("--grid-step", grid_step,
                     "Override every dimension's grid step");
  CLI::Option* o_radii =
      app.add_option("--radii", radii,
                     "Override the locality radius schedule (increasing)")
          ->delimiter(',');
  CLI::Option* o_tol =
      app.add_option("--tolerance", tolerance, "Override the value tolerance");
  CLI::Option* o_concepts =
      app.add_option("--concepts", concepts,
                     "Concepts to compute: comma list or 'all'")
          ->delimiter(',');
  CLI::Option* o_psi =
      app.add_option("--psi", psi, "Solution-map backend")
          ->check(CLI::IsMember({"grid", "symbolic"}));
  app.add_option("--format", format, "Report format")
      ->check(CLI::IsMember({"json", "csv", "text"}));
  CLI::Option* o_threads =
      app.add_option("--threads", threads, "Worker thread count")
          ->check(CLI::PositiveNumber);
  app.add_option("--output", output,
                 "Write the report to this file (atomic) instead of stdout");

  std::string in_solve, in_relations, in_verify, in_game, in_robust;
  CLI::App* solve =
      app.add_subcommand("solve", "Solve a problem file: all concept sets");
  solve->add_option("input", in_solve, "problem file")->required();
  CLI::App* relations = app.add_subcommand(
      "relations", "Pairwise set-order table of the image family");
  relations->add_option("input", in_relations, "problem file")->required();
  CLI::App* verify = app.add_subcommand(
      "verify", "Run the implication matrix and golden files over a directory");
  verify->add_option("input", in_verify, "fixture directory")->required();
  CLI::App* game = app.add_subcommand(
      "game", "Equilibrium/translation report for a finite game");
  game->add_option("input", in_game, "game tree (.game) or declared problem file")
      ->required();
  CLI::App* robust = app.add_subcommand(
      "robust", "Robust counterpart tables and reformulation agreement");
  robust->add_option("input", in_robust, "uncertain problem (.rob)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage error to stderr
    return 2;
  }

  RunConfig cfg;
  if (app.got_subcommand(solve)) {
    cfg.subcommand = Subcommand::kSolve;
    cfg.input = in_solve;
  } else if (app.got_subcommand(relations)) {
    cfg.subcommand = Subcommand::kRelations;
    cfg.input = in_relations;
  } else if (app.got_subcommand(verify)) {
    cfg.subcommand = Subcommand::kVerify;
    cfg.input = in_verify;
  } else if (app.got_subcommand(game)) {
    cfg.subcommand = Subcommand::kGame;
    cfg.input = in_game;
  } else {
    cfg.subcommand = Subcommand::kRobust;
    cfg.input = in_robust;
  }
  cfg.output = output;
  cfg.format = format == "csv"    ? OutputFormat::kCsv
               : format == "text" ? OutputFormat::kText
                                  : OutputFormat::kJson;
  if (*o_step) cfg.grid_step = grid_step;
  if (*o_radii) cfg.radii = radii;
  if (*o_tol) cfg.tolerance = tolerance;
  if (*o_concepts) {
    bool all = false;
    for (const std::string& c : concepts) all |= (c == "all");
    cfg.concepts = all ? std::vector<std::string>{} : concepts;
  }
  if (*o_psi)
    cfg.psi = psi == "grid" ? PsiBackend::kGrid : PsiBackend::kSymbolic;
  if (*o_threads) cfg.threads = threads;

  try {
    return execute(cfg);
  } catch (const Error& e) {
    std::cerr << "bilevel: " << context_message(cfg, e) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "bilevel: " << cfg.input << ": " << e.what() << "\n";
    return 2;
  }
}

}  // namespace bilevel
