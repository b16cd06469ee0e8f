#include "spbe/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace spbe::io {

namespace {

Vector vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where, "expected an array of numbers");
  Vector v(j.size());
  for (size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ParseError(where + "[" + std::to_string(k) + "]", "expected a number");
    v(k) = j[k].get<double>();
  }
  return v;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where, std::string("missing key '") + key + "'");
  return j.at(key);
}

}  // namespace

GameSpec game_spec_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("$", "expected a JSON object");
  GameSpec spec;
  spec.num_players = require(j, "players", "$").get<int>();
  spec.horizon = require(j, "horizon", "$").get<int>();
  for (const auto& s : require(j, "type_spaces", "$")) spec.type_space_sizes.push_back(s.get<int>());
  for (const auto& s : require(j, "action_spaces", "$")) spec.action_space_sizes.push_back(s.get<int>());

  const json& priors = require(j, "priors", "$");
  for (size_t i = 0; i < priors.size(); ++i) {
    spec.priors.push_back(vector_from_json(priors[i], "priors[" + std::to_string(i) + "]"));
  }

  if (j.contains("kernels") && !j.at("kernels").is_null()) {
    const json& kernels = j.at("kernels");
    // kernels[i][t][x][a] is a probability row over the player's next types.
    for (size_t i = 0; i < kernels.size(); ++i) {
      std::vector<std::vector<Matrix>> stages;
      for (size_t t = 0; t < kernels[i].size(); ++t) {
        const json& by_type = kernels[i][t];
        const size_t nx = by_type.size();
        std::vector<Matrix> by_action;
        for (size_t x = 0; x < nx; ++x) {
          const json& by_a = by_type[x];
          if (by_action.empty()) by_action.assign(by_a.size(), Matrix::Zero(nx, nx));
          for (size_t a = 0; a < by_a.size(); ++a) {
            const std::string where = "kernels[" + std::to_string(i) + "][" + std::to_string(t) +
                                      "][" + std::to_string(x) + "][" + std::to_string(a) + "]";
            Vector row = vector_from_json(by_a[a], where);
            if (a >= by_action.size() || static_cast<size_t>(row.size()) != nx) {
              throw ParseError(where, "inconsistent kernel dimensions");
            }
            by_action[a].row(x) = row;
          }
        }
        stages.push_back(std::move(by_action));
      }
      spec.kernels.push_back(std::move(stages));
    }
  }

  const json& rewards = require(j, "rewards", "$");
  for (size_t i = 0; i < rewards.size(); ++i) {
    const json& table = rewards[i];
    const size_t rows = table.size();
    Matrix r(rows, rows ? table[0].size() : 0);
    for (size_t tx = 0; tx < rows; ++tx) {
      Vector row = vector_from_json(table[tx], "rewards[" + std::to_string(i) + "][" +
                                                   std::to_string(tx) + "]");
      if (row.size() != r.cols()) {
        throw ParseError("rewards[" + std::to_string(i) + "]", "ragged reward table");
      }
      r.row(tx) = row;
    }
    spec.rewards.push_back(std::move(r));
  }
  return spec;
}

json game_spec_to_json(const GameSpec& spec) {
  json j;
  j["players"] = spec.num_players;
  j["horizon"] = spec.horizon;
  j["type_spaces"] = spec.type_space_sizes;
  j["action_spaces"] = spec.action_space_sizes;
  j["priors"] = json::array();
  for (const auto& p : spec.priors) j["priors"].push_back(vector_to_json(p));
  if (!spec.kernels.empty()) {
    json kernels = json::array();
    for (const auto& stages : spec.kernels) {
      json jstages = json::array();
      for (const auto& by_action : stages) {
        const Eigen::Index nx = by_action.empty() ? 0 : by_action[0].rows();
        json by_type = json::array();
        for (Eigen::Index x = 0; x < nx; ++x) {
          json rows = json::array();
          for (const auto& m : by_action) rows.push_back(vector_to_json(m.row(x)));
          by_type.push_back(std::move(rows));
        }
        jstages.push_back(std::move(by_type));
      }
      kernels.push_back(std::move(jstages));
    }
    j["kernels"] = std::move(kernels);
  }
  j["rewards"] = json::array();
  for (const auto& r : spec.rewards) {
    json table = json::array();
    for (Eigen::Index tx = 0; tx < r.rows(); ++tx) table.push_back(vector_to_json(r.row(tx)));
    j["rewards"].push_back(std::move(table));
  }
  return j;
}

GameSpec load_game_spec(const std::string& path) { return game_spec_from_json(read_document(path)); }

json config_to_json(const FixedPointConfig& config) {
  json j;
  j["max_iterations"] = config.max_iterations;
  j["damping"] = config.damping;
  j["fixed_point_tolerance"] = config.fixed_point_tolerance;
  j["argmax_tolerance"] = config.argmax_tolerance;
  j["quantize_resolution"] = config.quantize_resolution;
  j["degeneracy_tolerance"] = config.degeneracy_tolerance;
  j["pure_seed_cap"] = config.pure_seed_cap;
  j["num_random_seeds"] = config.num_random_seeds;
  j["rng_seed"] = config.rng_seed;
  j["selection_rule"] = "first_converged";
  return j;
}

FixedPointConfig config_from_json(const json& j) {
  FixedPointConfig config;
  config.max_iterations = j.value("max_iterations", config.max_iterations);
  config.damping = j.value("damping", config.damping);
  config.fixed_point_tolerance = j.value("fixed_point_tolerance", config.fixed_point_tolerance);
  config.argmax_tolerance = j.value("argmax_tolerance", config.argmax_tolerance);
  config.quantize_resolution = j.value("quantize_resolution", config.quantize_resolution);
  config.degeneracy_tolerance = j.value("degeneracy_tolerance", config.degeneracy_tolerance);
  config.pure_seed_cap = j.value("pure_seed_cap", config.pure_seed_cap);
  config.num_random_seeds = j.value("num_random_seeds", config.num_random_seeds);
  config.rng_seed = j.value("rng_seed", config.rng_seed);
  return config;
}

namespace {

json belief_to_json(const BeliefVector& belief) {
  json out = json::array();
  for (const auto& m : belief.marginals) out.push_back(vector_to_json(m.vec()));
  return out;
}

BeliefVector belief_from_json(const json& j, const std::string& where) {
  BeliefVector belief;
  for (size_t i = 0; i < j.size(); ++i) {
    belief.marginals.emplace_back(vector_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return belief;
}

}  // namespace

json equilibrium_to_json(const ValidatedGame& game, const FixedPointConfig& config,
                         const EquilibriumTree& tree) {
  json j;
  j["format"] = kEquilibriumFormat;
  j["config"] = config_to_json(config);
  j["game"] = game_spec_to_json(game.spec());
  json nodes = json::array();
  for (const auto& node : tree.nodes()) {
    json n;
    n["history"] = node.history;
    n["t"] = node.t;
    if (node.solution) {
      n["solved"] = true;
      n["belief"] = belief_to_json(node.belief);
      json prescriptions = json::array();
      for (const auto& pf : node.solution->gamma.prescriptions) {
        json rows = json::array();
        for (int x = 0; x < pf.num_types(); ++x) rows.push_back(vector_to_json(pf.row(x).vec()));
        prescriptions.push_back(std::move(rows));
      }
      n["prescriptions"] = std::move(prescriptions);
      json values = json::array();
      for (const auto& v : node.solution->values) values.push_back(vector_to_json(v));
      n["values"] = std::move(values);
      n["residual"] = node.solution->residual;
      n["iterations"] = node.solution->iterations;
      n["seed_id"] = node.solution->seed_id;
    } else {
      n["solved"] = false;
      n["failure"] = node.failure;
      if (node.belief.num_players() > 0) n["belief"] = belief_to_json(node.belief);
    }
    nodes.push_back(std::move(n));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

LoadedEquilibrium equilibrium_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("$", "expected a JSON object");
  const std::string format = require(j, "format", "$").get<std::string>();
  if (format != kEquilibriumFormat) {
    throw ParseError("format", "unsupported document format '" + format + "'");
  }
  ValidatedGame game = validate_game(game_spec_from_json(require(j, "game", "$")));
  FixedPointConfig config = config_from_json(require(j, "config", "$"));

  std::vector<EquilibriumNode> nodes;
  const json& jnodes = require(j, "nodes", "$");
  for (size_t k = 0; k < jnodes.size(); ++k) {
    const json& n = jnodes[k];
    const std::string where = "nodes[" + std::to_string(k) + "]";
    EquilibriumNode node;
    for (const auto& a : require(n, "history", where)) node.history.push_back(a.get<int>());
    node.t = require(n, "t", where).get<int>();
    if (require(n, "solved", where).get<bool>()) {
      node.belief = belief_from_json(require(n, "belief", where), where + ".belief");
      auto solution = std::make_shared<StageSolution>();
      const json& prescriptions = require(n, "prescriptions", where);
      for (size_t i = 0; i < prescriptions.size(); ++i) {
        const json& rows = prescriptions[i];
        Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (size_t x = 0; x < rows.size(); ++x) {
          m.row(x) = vector_from_json(rows[x], where + ".prescriptions");
        }
        solution->gamma.prescriptions.emplace_back(std::move(m));
      }
      for (const auto& v : require(n, "values", where)) {
        solution->values.push_back(vector_from_json(v, where + ".values"));
      }
      solution->residual = require(n, "residual", where).get<double>();
      solution->iterations = require(n, "iterations", where).get<int>();
      solution->seed_id = require(n, "seed_id", where).get<int>();
      node.solution = std::move(solution);
    } else {
      node.failure = n.value("failure", "unsolved");
      if (n.contains("belief")) node.belief = belief_from_json(n.at("belief"), where + ".belief");
    }
    nodes.push_back(std::move(node));
  }

  auto tree = std::make_shared<const EquilibriumTree>(std::move(nodes),
                                                      game.spec().action_space_sizes);
  return LoadedEquilibrium{std::move(game), config, std::move(tree)};
}

LoadedEquilibrium load_equilibrium(const std::string& path) {
  return equilibrium_from_json(read_document(path));
}

json report_to_json(const VerificationReport& report) {
  json j;
  j["format"] = kReportFormat;
  j["pass"] = report.pass;
  j["tolerance"] = report.tolerance;
  j["max_gap"] = report.max_gap;
  j["belief_consistency_max_error"] = report.belief_consistency_max_error;
  json uncovered = json::array();
  for (const auto& h : report.uncovered) uncovered.push_back(h);
  j["uncovered"] = std::move(uncovered);
  json entries = json::array();
  for (const auto& e : report.entries) {
    json row;
    row["player"] = e.player;
    row["history"] = e.history;
    row["type"] = e.own_type;
    row["equilibrium_value"] = e.equilibrium_value;
    row["best_response_value"] = e.best_response_value;
    row["gap"] = e.gap;
    entries.push_back(std::move(row));
  }
  j["entries"] = std::move(entries);
  return j;
}

std::string report_table(const VerificationReport& report) {
  std::ostringstream os;
  os << "player  history         type  eq_value      br_value      gap\n";
  for (const auto& e : report.entries) {
    std::string hist = "[";
    for (size_t k = 0; k < e.history.size(); ++k) {
      if (k) hist += " ";
      hist += std::to_string(e.history[k]);
    }
    hist += "]";
    os << std::left << std::setw(8) << e.player << std::setw(16) << hist << std::setw(6)
       << e.own_type << std::setw(14) << std::setprecision(9) << e.equilibrium_value
       << std::setw(14) << e.best_response_value << std::setprecision(3) << std::scientific
       << e.gap << std::defaultfloat << "\n";
  }
  for (const auto& h : report.uncovered) {
    std::string hist;
    for (int a : h) hist += std::to_string(a) + " ";
    os << "uncovered node: [" << hist << "]\n";
  }
  os << "max_gap = " << std::setprecision(12) << report.max_gap
     << "  belief_error = " << report.belief_consistency_max_error << "  tolerance = "
     << report.tolerance << "  => " << (report.pass ? "PASS" : "FAIL") << "\n";
  return os.str();
}

json simulation_to_json(const SimulationResult& result) {
  json j;
  j["episodes"] = result.episodes;
  j["mean"] = result.mean;
  j["stderr"] = result.stderr_;
  return j;
}

json reproduction_to_json(const pubgoods::ReproductionReport& report) {
  auto summary_to_json = [](const pubgoods::EquilibriumSummary& s) {
    json j;
    j["stage1"] = s.stage1;
    json mu2 = json::array();
    for (const auto& b : s.mu2) mu2.push_back(b);
    j["mu2"] = std::move(mu2);
    j["verifier_max_gap"] = s.verifier_max_gap;
    j["sequentially_rational"] = s.sequentially_rational;
    return j;
  };
  json j;
  j["pass"] = report.pass;
  j["found_asymmetric"] = report.found_asymmetric;
  j["found_antisymmetric_twin"] = report.found_antisymmetric_twin;
  j["found_symmetric_mixed"] = report.found_symmetric_mixed;
  j["symmetric_p_low"] = report.symmetric_p_low;
  j["symmetric_posterior"] = report.symmetric_posterior;
  j["asymmetric"] = summary_to_json(report.asymmetric);
  j["symmetric"] = summary_to_json(report.symmetric);
  j["failures"] = report.failures;
  return j;
}

std::string reproduction_text(const pubgoods::ReproductionReport& report) {
  std::ostringstream os;
  os << std::setprecision(10);
  auto print_summary = [&](const char* name, const pubgoods::EquilibriumSummary& s) {
    os << name << " stage-1 (p1L, p2L, p1H, p2H) = (" << s.stage1[0] << ", " << s.stage1[1] << ", "
       << s.stage1[2] << ", " << s.stage1[3] << ")\n";
    const char* labels[4] = {"00", "01", "10", "11"};
    for (int a = 0; a < 4; ++a) {
      os << "  mu2[" << labels[a] << "] = (" << s.mu2[a][0] << ", " << s.mu2[a][1] << ")\n";
    }
    os << "  sequential rationality: " << (s.sequentially_rational ? "pass" : "FAIL")
       << " (max gap " << s.verifier_max_gap << ")\n";
  };
  os << "two-stage public goods reproduction\n";
  os << "found asymmetric: " << (report.found_asymmetric ? "yes" : "NO")
     << ", antisymmetric twin: " << (report.found_antisymmetric_twin ? "yes" : "NO")
     << ", symmetric mixed: " << (report.found_symmetric_mixed ? "yes" : "NO") << "\n";
  if (report.found_asymmetric) print_summary("asymmetric", report.asymmetric);
  if (report.found_symmetric_mixed) {
    print_summary("symmetric", report.symmetric);
    os << "  symmetric p_low = " << report.symmetric_p_low << ", pass posterior = "
       << report.symmetric_posterior << "\n";
  }
  for (const auto& f : report.failures) os << "failure: " << f << "\n";
  os << (report.pass ? "PASS" : "FAIL") << "\n";
  return os.str();
}

std::string dump_document(const json& j) { return j.dump(2) + "\n"; }

void write_document(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path, "cannot open for writing");
  out << dump_document(j);
}

json read_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open for reading");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, e.what());
  }
}

}  // namespace spbe::io
