#include "spbe/cli.hpp"

#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace spbe;
using namespace spbe::testing;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  Workspace() {
    dir = fs::path("cli_artifacts") / std::to_string(counter++);
    fs::create_directories(dir);
  }
  fs::path path(const std::string& name) const { return dir / name; }
  fs::path dir;
  static inline int counter = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_pubgoods_spec(const fs::path& p) {
  ValidatedGame game = pubgoods::build_game({0.1, 0.2, 1.2});
  io::write_document(p.string(), io::game_spec_to_json(game.spec()));
}

int run_quiet(const cli::RunConfig& config, std::string* out_text = nullptr,
              std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(config, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("the shipped example game file matches the built-in model") {
  // games/pubgoods.json lives at the repo root; tests run from the build
  // tree, so resolve it relative to this source file's directory.
  const fs::path repo_games = fs::path(__FILE__).parent_path().parent_path() / "games";
  GameSpec from_file = io::load_game_spec((repo_games / "pubgoods.json").string());
  ValidatedGame expected = pubgoods::build_game({0.1, 0.2, 1.2});
  ValidatedGame loaded = validate_game(from_file);
  CHECK(loaded.num_players() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(loaded.prior(i) == expected.prior(i));
    CHECK((loaded.spec().rewards[i] - expected.spec().rewards[i]).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("solve then verify round-trips with exit 0 and identical bytes") {
  Workspace ws;
  write_pubgoods_spec(ws.path("game.json"));

  cli::RunConfig solve;
  solve.command = cli::Command::kSolve;
  solve.game_path = ws.path("game.json").string();
  solve.output_path = ws.path("eq.json").string();
  CHECK(run_quiet(solve) == cli::kExitOk);

  solve.output_path = ws.path("eq2.json").string();
  CHECK(run_quiet(solve) == cli::kExitOk);
  CHECK(slurp(ws.path("eq.json")) == slurp(ws.path("eq2.json")));

  cli::RunConfig verify;
  verify.command = cli::Command::kVerify;
  verify.equilibrium_path = ws.path("eq.json").string();
  verify.output_path = ws.path("report.json").string();
  std::string table;
  CHECK(run_quiet(verify, &table) == cli::kExitOk);
  CHECK(table.find("PASS") != std::string::npos);

  io::json report = io::read_document(ws.path("report.json").string());
  CHECK(report.at("pass").get<bool>());
  CHECK(report.at("max_gap").get<double>() <= 1e-8);
  CHECK(report.at("belief_consistency_max_error").get<double>() <= 1e-10);
}

TEST_CASE("re-ingesting an equilibrium document is lossless") {
  Workspace ws;
  write_pubgoods_spec(ws.path("game.json"));

  ValidatedGame game = validate_game(io::load_game_spec(ws.path("game.json").string()));
  FixedPointConfig fp;
  EquilibriumGenerator generator(game, fp);
  ForwardConstruction fc = forward_construct(generator);
  io::write_document(ws.path("eq.json").string(),
                     io::equilibrium_to_json(game, fp, *fc.tree));

  io::LoadedEquilibrium loaded = io::load_equilibrium(ws.path("eq.json").string());
  REQUIRE(loaded.tree->nodes().size() == fc.tree->nodes().size());
  for (size_t k = 0; k < fc.tree->nodes().size(); ++k) {
    const auto& a = fc.tree->nodes()[k];
    const auto& b = loaded.tree->nodes()[k];
    REQUIRE(a.solution);
    REQUIRE(b.solution);
    for (int i = 0; i < 2; ++i) {
      CHECK(a.solution->gamma.of(i).matrix() == b.solution->gamma.of(i).matrix());
      CHECK(a.solution->values[i] == b.solution->values[i]);
      CHECK(a.belief.of(i).vec() == b.belief.of(i).vec());
    }
  }
}

TEST_CASE("verify flags a corrupted equilibrium with exit 1 and localized gaps") {
  Workspace ws;
  write_pubgoods_spec(ws.path("game.json"));

  cli::RunConfig solve;
  solve.command = cli::Command::kSolve;
  solve.game_path = ws.path("game.json").string();
  solve.output_path = ws.path("eq.json").string();
  REQUIRE(run_quiet(solve) == cli::kExitOk);

  io::json doc = io::read_document(ws.path("eq.json").string());
  // Corrupt player 2's low-type row at the root.
  doc["nodes"][0]["prescriptions"][1][0] = {0.5, 0.5};
  io::write_document(ws.path("bad.json").string(), doc);

  cli::RunConfig verify;
  verify.command = cli::Command::kVerify;
  verify.equilibrium_path = ws.path("bad.json").string();
  std::string table, err;
  CHECK(run_quiet(verify, &table, &err) == cli::kExitVerifyFail);
  CHECK(table.find("FAIL") != std::string::npos);
  CHECK(err.find("max_gap") != std::string::npos);
}

TEST_CASE("unparseable input exits with the input-error code") {
  Workspace ws;
  std::ofstream(ws.path("junk.json")) << "{ not json";
  cli::RunConfig verify;
  verify.command = cli::Command::kVerify;
  verify.equilibrium_path = ws.path("junk.json").string();
  std::string out, err;
  CHECK(run_quiet(verify, &out, &err) == cli::kExitInputError);
  CHECK(!err.empty());
}

TEST_CASE("a game without any discoverable fixed point exits with the solver-failure code") {
  Workspace ws;
  GameSpec spec;
  spec.num_players = 2;
  spec.horizon = 1;
  spec.type_space_sizes = {1, 1};
  spec.action_space_sizes = {2, 2};
  spec.priors = {Vector::Ones(1), Vector::Ones(1)};
  spec.rewards = {Matrix(1, 4), Matrix(1, 4)};
  spec.rewards[0] << 0.3, -0.7, -0.3, 0.7;
  spec.rewards[1] << -0.3, 0.7, 0.3, -0.7;
  io::write_document(ws.path("pennies.json").string(), io::game_spec_to_json(spec));

  cli::RunConfig solve;
  solve.command = cli::Command::kSolve;
  solve.game_path = ws.path("pennies.json").string();
  solve.output_path = ws.path("eq.json").string();
  std::string out, err;
  CHECK(run_quiet(solve, &out, &err) == cli::kExitSolverFail);
  CHECK(err.find("no fixed point") != std::string::npos);
}

TEST_CASE("simulate command reports reproducible per-player means") {
  Workspace ws;
  write_pubgoods_spec(ws.path("game.json"));
  cli::RunConfig solve;
  solve.command = cli::Command::kSolve;
  solve.game_path = ws.path("game.json").string();
  solve.output_path = ws.path("eq.json").string();
  REQUIRE(run_quiet(solve) == cli::kExitOk);

  cli::RunConfig sim;
  sim.command = cli::Command::kSimulate;
  sim.equilibrium_path = ws.path("eq.json").string();
  sim.episodes = 50000;
  sim.rng_seed = 11;
  sim.output_path = ws.path("sim.json").string();
  std::string out1, out2;
  CHECK(run_quiet(sim, &out1) == cli::kExitOk);
  CHECK(run_quiet(sim, &out2) == cli::kExitOk);
  CHECK(out1 == out2);
  io::json result = io::read_document(ws.path("sim.json").string());
  CHECK(result.at("episodes").get<long long>() == 50000);
  CHECK(result.at("mean").size() == 2);
}

TEST_CASE("example command reproduces the worked equilibria with exit 0") {
  cli::RunConfig example;
  example.command = cli::Command::kExample;
  example.example_params = {0.1, 0.2, 1.2};
  std::string out;
  CHECK(run_quiet(example, &out) == cli::kExitOk);
  CHECK(out.find("PASS") != std::string::npos);
}

TEST_CASE("map command emits a deterministic CSV through the real argv entry point") {
  Workspace ws;
  const std::string out_path = ws.path("map.csv").string();
  std::vector<std::string> args{"spbe",  "map",       "--resolution", "0.25",
                                "--out", out_path};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  CHECK(cli::main(static_cast<int>(argv.size()), argv.data()) == cli::kExitOk);
  const std::string csv = slurp(out_path);
  CHECK(csv.rfind("pi1,pi2,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 26);
}
