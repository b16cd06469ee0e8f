#include "spbe/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

namespace spbe::cli {

namespace {

void write_or_print(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError(path, "cannot open for writing");
  f << content;
}

int run_solve(const RunConfig& config, std::ostream& out, std::ostream& err) {
  ValidatedGame game = validate_game(io::load_game_spec(config.game_path));
  EquilibriumGenerator generator(game, config.fixed_point);

  if (config.enumerate_fixed_points) {
    const BeliefVector prior = BeliefVector::from_priors(game);
    auto sols = enumerate_stage_fixed_points(game, 1, prior, generator.continuation_from(2),
                                             config.fixed_point);
    out << "distinct root fixed points: " << sols.size() << "\n";
    out << std::setprecision(10);
    for (const auto& s : sols) {
      out << "  seed " << s.seed_id << " residual " << s.residual << " prescriptions:";
      for (int i = 0; i < s.gamma.num_players(); ++i) {
        for (int x = 0; x < game.num_types(i); ++x) {
          out << " p" << i + 1 << "x" << x << "=(";
          const Distribution row = s.gamma.of(i).row(x);
          for (int a = 0; a < row.size(); ++a) out << (a ? "," : "") << row(a);
          out << ")";
        }
      }
      out << "\n";
    }
  }

  ForwardConstruction fc = forward_construct(generator, config.jobs);
  io::json doc = io::equilibrium_to_json(game, config.fixed_point, *fc.tree);
  if (!config.output_path.empty()) {
    io::write_document(config.output_path, doc);
  } else {
    out << io::dump_document(doc);
  }
  if (!fc.tree->fully_solved()) {
    err << "solver failed on one or more tree nodes:\n";
    for (const auto& node : fc.tree->nodes()) {
      if (node.solution) continue;
      err << "  node [";
      for (int a : node.history) err << a << " ";
      err << "]: " << node.failure << "\n";
    }
    return kExitSolverFail;
  }
  return kExitOk;
}

int run_verify(const RunConfig& config, std::ostream& out, std::ostream& err) {
  io::LoadedEquilibrium loaded = io::load_equilibrium(config.equilibrium_path);
  StrategyProfile profile(loaded.tree);
  BeliefSystem beliefs(loaded.tree);
  VerificationReport report =
      check_sequential_rationality(loaded.game, profile, beliefs, config.tolerance);
  if (report.uncovered.empty()) {
    report.belief_consistency_max_error = check_belief_consistency(loaded.game, profile, beliefs);
  }
  out << io::report_table(report);
  if (!config.output_path.empty()) io::write_document(config.output_path, io::report_to_json(report));
  if (!report.pass) {
    err << "verification failed: max_gap = " << report.max_gap << "\n";
    return kExitVerifyFail;
  }
  return kExitOk;
}

int run_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  io::LoadedEquilibrium loaded = io::load_equilibrium(config.equilibrium_path);
  StrategyProfile profile(loaded.tree);
  SimulationResult result =
      simulate(loaded.game, profile, config.episodes, config.rng_seed, config.jobs);
  out << "episodes: " << result.episodes << "\n" << std::setprecision(10);
  for (size_t i = 0; i < result.mean.size(); ++i) {
    out << "player " << i + 1 << ": mean " << result.mean[i] << " stderr " << result.stderr_[i]
        << "\n";
  }
  if (!config.output_path.empty()) {
    io::json doc = io::simulation_to_json(result);
    doc["rng_seed"] = config.rng_seed;
    io::write_document(config.output_path, doc);
  }
  (void)err;
  return kExitOk;
}

int run_example(const RunConfig& config, std::ostream& out, std::ostream& err) {
  pubgoods::ReproductionReport report = pubgoods::reproduce_example_equilibria(config.example_params);
  out << io::reproduction_text(report);
  if (!config.output_path.empty()) {
    io::json doc = io::reproduction_to_json(report);
    doc["q"] = config.example_params.q;
    doc["xl"] = config.example_params.xl;
    doc["xh"] = config.example_params.xh;
    io::write_document(config.output_path, doc);
  }
  if (!report.pass) {
    err << "example reproduction failed\n";
    return kExitVerifyFail;
  }
  return kExitOk;
}

int run_map(const RunConfig& config, std::ostream& out, std::ostream& err) {
  std::string csv =
      pubgoods::emit_region_map(config.resolution, config.example_params, config.map_mode, config.jobs);
  write_or_print(config.output_path, csv, out);
  (void)err;
  return kExitOk;
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    switch (config.command) {
      case Command::kSolve:
        return run_solve(config, out, err);
      case Command::kVerify:
        return run_verify(config, out, err);
      case Command::kSimulate:
        return run_simulate(config, out, err);
      case Command::kExample:
        return run_example(config, out, err);
      case Command::kMap:
        return run_map(config, out, err);
    }
    err << "unknown command\n";
    return kExitInputError;
  } catch (const NoFixedPointFound& e) {
    err << e.what() << "\n";
    return kExitSolverFail;
  } catch (const ParseError& e) {
    err << e.what() << "\n";
    return kExitInputError;
  } catch (const ValidationError& e) {
    err << e.what() << "\n";
    return kExitInputError;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitInputError;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"solver and verifier for belief-based equilibria of finite dynamic games "
               "with privately observed types"};
  app.require_subcommand(1);

  RunConfig config;
  config.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  auto add_solver_flags = [&](CLI::App* cmd) {
    cmd->add_option("--quantize-resolution", config.fixed_point.quantize_resolution,
                    "belief memoization resolution");
    cmd->add_option("--damping", config.fixed_point.damping, "best-response damping in (0,1]")
        ->check(CLI::Range(1e-6, 1.0));
    cmd->add_option("--max-iter", config.fixed_point.max_iterations, "iteration cap per seed");
    cmd->add_option("--fp-tol", config.fixed_point.fixed_point_tolerance,
                    "fixed-point residual tolerance");
    cmd->add_option("--argmax-tol", config.fixed_point.argmax_tolerance,
                    "argmax tie tolerance");
    cmd->add_option("--seed", config.fixed_point.rng_seed, "seed for randomized restarts");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve a game and emit an equilibrium document");
  solve->add_option("--game", config.game_path, "game spec JSON")->required();
  solve->add_option("--out", config.output_path, "equilibrium document path (stdout if omitted)");
  solve->add_flag("--enumerate-fixed-points", config.enumerate_fixed_points,
                  "report all distinct converged root fixed points");
  solve->add_option("--jobs", config.jobs, "parallelism degree");
  add_solver_flags(solve);

  CLI::App* verify = app.add_subcommand("verify", "verify an equilibrium document");
  verify->add_option("--equilibrium", config.equilibrium_path, "equilibrium document")->required();
  verify->add_option("--out", config.output_path, "verification report path");
  verify->add_option("--tol", config.tolerance, "sequential rationality tolerance");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo payoff estimate");
  simulate->add_option("--equilibrium", config.equilibrium_path, "equilibrium document")->required();
  simulate->add_option("--episodes", config.episodes, "episode count");
  simulate->add_option("--seed", config.rng_seed, "simulation RNG seed");
  simulate->add_option("--jobs", config.jobs, "parallelism degree");
  simulate->add_option("--out", config.output_path, "result JSON path");

  CLI::App* example = app.add_subcommand("example", "reproduce the two-stage public goods example");
  example->add_option("--q", config.example_params.q, "prior mass on the high cost type");
  example->add_option("--xl", config.example_params.xl, "low contribution cost");
  example->add_option("--xh", config.example_params.xh, "high contribution cost");
  example->add_option("--out", config.output_path, "report JSON path");

  CLI::App* map = app.add_subcommand("map", "emit the stage-2 solution region map as CSV");
  map->add_option("--resolution", config.resolution, "grid resolution");
  std::string mode = "canonical";
  map->add_option("--mode", mode, "canonical | all_solutions")
      ->check(CLI::IsMember({"canonical", "all_solutions"}));
  map->add_option("--xl", config.example_params.xl, "low contribution cost");
  map->add_option("--q", config.example_params.q, "prior mass on the high cost type");
  map->add_option("--xh", config.example_params.xh, "high contribution cost");
  map->add_option("--out", config.output_path, "CSV path (stdout if omitted)");
  map->add_option("--jobs", config.jobs, "parallelism degree");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInputError;
  }

  if (solve->parsed()) config.command = Command::kSolve;
  if (verify->parsed()) config.command = Command::kVerify;
  if (simulate->parsed()) config.command = Command::kSimulate;
  if (example->parsed()) config.command = Command::kExample;
  if (map->parsed()) {
    config.command = Command::kMap;
    config.map_mode = mode == "canonical" ? pubgoods::MapMode::kCanonical
                                          : pubgoods::MapMode::kAllSolutions;
  }
  return run(config, std::cout, std::cerr);
}

}  // namespace spbe::cli
