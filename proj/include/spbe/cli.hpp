#pragma once

#include "spbe/io.hpp"

#include <optional>

namespace spbe::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFail = 1;
inline constexpr int kExitSolverFail = 2;
inline constexpr int kExitInputError = 3;

enum class Command { kSolve, kVerify, kSimulate, kExample, kMap };

struct RunConfig {
  Command command = Command::kSolve;
  std::string game_path;
  std::string equilibrium_path;
  std::string output_path;

  FixedPointConfig fixed_point;
  bool enumerate_fixed_points = false;

  double tolerance = 1e-8;       // verify
  long long episodes = 1000000;  // simulate
  std::uint64_t rng_seed = 0;

  pubgoods::Params example_params;  // example
  double resolution = 0.01;         // map
  pubgoods::MapMode map_mode = pubgoods::MapMode::kCanonical;

  int jobs = 1;
};

/// Executes one command; writes artifacts, prints diagnostics to `err` and
/// primary human-readable output to `out`.  Returns the process exit code.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv into a RunConfig and runs it.
int main(int argc, char** argv);

}  // namespace spbe::cli
