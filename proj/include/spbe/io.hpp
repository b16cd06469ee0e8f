#pragma once

#include "spbe/pubgoods.hpp"
#include "spbe/solver.hpp"
#include "spbe/verify.hpp"

#include <json.hpp>

#include <iosfwd>

namespace spbe::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kEquilibriumFormat = "spbe-equilibrium/1";
inline constexpr const char* kReportFormat = "spbe-verify-report/1";

/// Game spec document: top-level keys players, horizon, type_spaces,
/// action_spaces, priors, kernels (optional), rewards.
GameSpec game_spec_from_json(const json& j);
json game_spec_to_json(const GameSpec& spec);
GameSpec load_game_spec(const std::string& path);

json config_to_json(const FixedPointConfig& config);
FixedPointConfig config_from_json(const json& j);

/// Equilibrium document: format tag, resolved config, embedded game spec,
/// and one record per public-history node.
json equilibrium_to_json(const ValidatedGame& game, const FixedPointConfig& config,
                         const EquilibriumTree& tree);

struct LoadedEquilibrium {
  ValidatedGame game;
  FixedPointConfig config;
  std::shared_ptr<const EquilibriumTree> tree;
};
LoadedEquilibrium equilibrium_from_json(const json& j);
LoadedEquilibrium load_equilibrium(const std::string& path);

json report_to_json(const VerificationReport& report);
std::string report_table(const VerificationReport& report);

json simulation_to_json(const SimulationResult& result);

json reproduction_to_json(const pubgoods::ReproductionReport& report);
std::string reproduction_text(const pubgoods::ReproductionReport& report);

/// Serializes with lossless doubles and a trailing newline; byte-stable
/// across runs for identical inputs.
std::string dump_document(const json& j);
void write_document(const std::string& path, const json& j);
json read_document(const std::string& path);

}  // namespace spbe::io
