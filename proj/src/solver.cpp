#include "spbe/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace spbe {

namespace {

// A seed whose best residual has not improved for this many iterations is
// chattering around a discontinuity of the best-response map and will not
// converge; cut it early instead of burning max_iterations.
constexpr int kStaleWindow = 100;
constexpr double kImprovementFactor = 0.95;

GammaProfile uniform_profile(const ValidatedGame& game) {
  GammaProfile p;
  p.prescriptions.reserve(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) {
    p.prescriptions.push_back(PartialFunction::uniform(game.num_types(i), game.num_actions(i)));
  }
  return p;
}

GammaProfile pure_profile(const ValidatedGame& game, std::uint64_t index) {
  GammaProfile p;
  for (int i = 0; i < game.num_players(); ++i) {
    Matrix rows = Matrix::Zero(game.num_types(i), game.num_actions(i));
    for (int x = 0; x < game.num_types(i); ++x) {
      const int a = static_cast<int>(index % game.num_actions(i));
      index /= game.num_actions(i);
      rows(x, a) = 1.0;
    }
    p.prescriptions.emplace_back(std::move(rows));
  }
  return p;
}

GammaProfile random_profile(const ValidatedGame& game, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  GammaProfile p;
  for (int i = 0; i < game.num_players(); ++i) {
    Matrix rows(game.num_types(i), game.num_actions(i));
    for (int x = 0; x < game.num_types(i); ++x) {
      double sum = 0.0;
      for (int a = 0; a < game.num_actions(i); ++a) {
        rows(x, a) = -std::log1p(-unit());  // Exp(1), so rows are Dirichlet(1)
        sum += rows(x, a);
      }
      rows.row(x) /= sum;
    }
    p.prescriptions.emplace_back(std::move(rows));
  }
  return p;
}

std::vector<GammaProfile> make_seeds(const ValidatedGame& game, const FixedPointConfig& config) {
  std::vector<GammaProfile> seeds;
  double pure_count = 1.0;
  for (int i = 0; i < game.num_players(); ++i) {
    for (int x = 0; x < game.num_types(i); ++x) pure_count *= game.num_actions(i);
  }
  if (pure_count <= static_cast<double>(config.pure_seed_cap)) {
    for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(pure_count); ++k) {
      seeds.push_back(pure_profile(game, k));
    }
  } else {
    seeds.push_back(uniform_profile(game));
    for (int k = 0; k < config.num_random_seeds; ++k) {
      seeds.push_back(random_profile(game, mix_seed(config.rng_seed, k)));
    }
  }
  seeds.insert(seeds.end(), config.extra_seeds.begin(), config.extra_seeds.end());
  return seeds;
}

/// Per-iteration evaluation of the stage objective for every player, type
/// and pure own action, with the profile frozen inside the belief update.
/// Children are solved lazily and only for joint actions the other players
/// reach with positive probability.
class StageEvaluator {
 public:
  StageEvaluator(const ValidatedGame& game, int t, const BeliefVector& belief,
                 const ContinuationFn& continuation, const FixedPointConfig& config)
      : game_(game), t_(t), belief_(belief), continuation_(continuation), config_(config) {}

  /// action_values[i][x](a) for the given profile.
  std::vector<std::vector<Vector>> evaluate(const GammaProfile& profile) {
    const int n = game_.num_players();
    const int na_joint = game_.num_joint_actions();
    const bool last_stage = t_ >= game_.horizon();

    std::vector<std::optional<BeliefVector>> children(na_joint);
    auto child_at = [&](int a) -> const BeliefVector& {
      if (!children[a]) {
        children[a] =
            update_vector(game_, belief_, profile, a, t_, config_.degeneracy_tolerance);
      }
      return *children[a];
    };

    std::vector<std::vector<Vector>> av(n);
    for (int i = 0; i < n; ++i) {
      const int nx = game_.num_types(i);
      const int na = game_.num_actions(i);
      av[i].assign(nx, Vector::Zero(na));

      // Joint types of the other players, weighted by their marginals.
      std::vector<int> other_players;
      for (int j = 0; j < n; ++j) {
        if (j != i) other_players.push_back(j);
      }
      std::vector<int> other_sizes;
      for (int j : other_players) other_sizes.push_back(game_.num_types(j));
      const int n_other = space_size(other_sizes);

      for (int x = 0; x < nx; ++x) {
        Vector& row_values = av[i][x];
        for (int a = 0; a < na_joint; ++a) {
          auto digits = game_.split_actions(a);
          double opp_weight = 0.0;
          double reward_exp = 0.0;
          std::vector<int> joint_type(n);
          joint_type[i] = x;
          for (int ox = 0; ox < n_other; ++ox) {
            auto od = split_index(ox, other_sizes);
            double w = 1.0;
            for (size_t k = 0; k < other_players.size(); ++k) {
              const int j = other_players[k];
              w *= belief_.of(j)(od[k]) * profile.of(j).prob(od[k], digits[j]);
              joint_type[j] = od[k];
            }
            if (w == 0.0) continue;
            opp_weight += w;
            reward_exp += w * game_.reward(i, joint_index(joint_type, game_.spec().type_space_sizes), a);
          }
          double contribution = reward_exp;
          if (!last_stage && opp_weight > 0.0) {
            const Matrix& k = game_.kernel(i, t_, a);
            double cont = 0.0;
            for (int xn = 0; xn < nx; ++xn) {
              if (k(x, xn) == 0.0) continue;
              cont += k(x, xn) * continuation_(i, child_at(a), xn);
            }
            contribution += opp_weight * cont;
          }
          row_values(digits[i]) += contribution;
        }
      }
    }
    return av;
  }

 private:
  const ValidatedGame& game_;
  int t_;
  const BeliefVector& belief_;
  const ContinuationFn& continuation_;
  const FixedPointConfig& config_;
};

Distribution tie_uniform(const Vector& action_values, double argmax_tolerance) {
  const double best = action_values.maxCoeff();
  Vector mix = Vector::Zero(action_values.size());
  int count = 0;
  for (Eigen::Index a = 0; a < action_values.size(); ++a) {
    if (action_values(a) >= best - argmax_tolerance) {
      mix(a) = 1.0;
      ++count;
    }
  }
  mix /= count;
  return Distribution(std::move(mix));
}

double profile_residual(const ValidatedGame& game, const GammaProfile& profile,
                        const std::vector<std::vector<Vector>>& av) {
  double residual = 0.0;
  for (int i = 0; i < game.num_players(); ++i) {
    for (int x = 0; x < game.num_types(i); ++x) {
      const double best = av[i][x].maxCoeff();
      const double current = av[i][x].dot(profile.of(i).row(x).vec());
      residual = std::max(residual, best - current);
    }
  }
  return residual;
}

std::vector<Vector> values_from(const ValidatedGame& game, const GammaProfile& profile,
                                const std::vector<std::vector<Vector>>& av) {
  std::vector<Vector> values(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) {
    values[i] = Vector(game.num_types(i));
    for (int x = 0; x < game.num_types(i); ++x) {
      values[i](x) = av[i][x].dot(profile.of(i).row(x).vec());
    }
  }
  return values;
}

struct SeedRun {
  bool converged = false;
  StageSolution solution;
  SeedDiagnostic diagnostic;
};

SeedRun run_seed(const ValidatedGame& game, int t, const BeliefVector& belief,
                 const ContinuationFn& continuation, const FixedPointConfig& config,
                 const GammaProfile& seed, int seed_id) {
  StageEvaluator eval(game, t, belief, continuation, config);
  SeedRun run;
  run.diagnostic.seed_id = seed_id;

  GammaProfile profile = seed;
  double best_residual = std::numeric_limits<double>::infinity();
  int last_improvement = 0;
  int iter = 0;
  try {
    for (;; ++iter) {
      auto av = eval.evaluate(profile);
      const double residual = profile_residual(game, profile, av);
      if (residual < best_residual * kImprovementFactor) {
        best_residual = residual;
        last_improvement = iter;
      }
      if (residual <= config.fixed_point_tolerance) {
        // Converged.  Snap rows whose best response is strictly unique to the
        // pure argmax, keeping the snap only if it still certifies.
        GammaProfile polished = profile;
        bool snapped = false;
        for (int i = 0; i < game.num_players(); ++i) {
          for (int x = 0; x < game.num_types(i); ++x) {
            const Vector& v = av[i][x];
            Eigen::Index best_a;
            const double best = v.maxCoeff(&best_a);
            double second = -std::numeric_limits<double>::infinity();
            for (Eigen::Index a = 0; a < v.size(); ++a) {
              if (a != best_a) second = std::max(second, v(a));
            }
            if (v.size() > 1 && best - second > config.argmax_tolerance) {
              Distribution pure = Distribution::point_mass(static_cast<int>(best_a), v.size());
              if (!(pure.vec() == polished.of(i).row(x).vec())) snapped = true;
              polished.of(i).set_row(x, pure);
            }
          }
        }
        double final_residual = residual;
        if (snapped) {
          auto av2 = eval.evaluate(polished);
          const double r2 = profile_residual(game, polished, av2);
          if (r2 <= config.fixed_point_tolerance) {
            profile = polished;
            av = std::move(av2);
            final_residual = r2;
          }
        }
        run.converged = true;
        run.solution.gamma = profile;
        run.solution.values = values_from(game, profile, av);
        run.solution.residual = final_residual;
        run.solution.iterations = iter;
        run.solution.seed_id = seed_id;
        run.diagnostic.final_residual = final_residual;
        run.diagnostic.iterations = iter;
        return run;
      }
      if (iter >= config.max_iterations || iter - last_improvement > kStaleWindow) break;

      // The undamped best-response profile often is the fixed point (always
      // so without strategic coupling); accept it outright when it already
      // certifies, otherwise take the damped step.
      GammaProfile candidate = profile;
      for (int i = 0; i < game.num_players(); ++i) {
        for (int x = 0; x < game.num_types(i); ++x) {
          candidate.of(i).set_row(x, tie_uniform(av[i][x], config.argmax_tolerance));
        }
      }
      auto av_candidate = eval.evaluate(candidate);
      if (profile_residual(game, candidate, av_candidate) <= config.fixed_point_tolerance) {
        profile = std::move(candidate);
        ++iter;
        continue;
      }

      GammaProfile next = profile;
      for (int i = 0; i < game.num_players(); ++i) {
        for (int x = 0; x < game.num_types(i); ++x) {
          Vector mixed = config.damping * candidate.of(i).row(x).vec() +
                         (1.0 - config.damping) * profile.of(i).row(x).vec();
          next.of(i).set_row(x, Distribution(std::move(mixed)));
        }
      }
      profile = std::move(next);
    }
    run.diagnostic.final_residual = best_residual;
    run.diagnostic.iterations = iter;
  } catch (const Error& e) {
    // A child solve failed along this seed's trajectory.
    run.diagnostic.final_residual = std::numeric_limits<double>::infinity();
    run.diagnostic.iterations = iter;
    run.diagnostic.note = e.what();
  }
  return run;
}

std::string belief_to_string(const BeliefVector& belief) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < belief.num_players(); ++i) {
    if (i) os << "; ";
    for (int x = 0; x < belief.of(i).size(); ++x) {
      if (x) os << ",";
      os << belief.of(i)(x);
    }
  }
  os << ")";
  return os.str();
}

}  // namespace

NoFixedPointFound::NoFixedPointFound(int t_in, const BeliefVector& belief,
                                     std::vector<SeedDiagnostic> diagnostics_in)
    : Error([&] {
        std::ostringstream os;
        os << "no fixed point found at stage " << t_in << ", belief " << belief_to_string(belief)
           << "; " << diagnostics_in.size() << " seeds tried, best residuals:";
        for (const auto& d : diagnostics_in) {
          os << " [seed " << d.seed_id << "] " << d.final_residual;
        }
        return os.str();
      }()),
      t(t_in),
      diagnostics(std::move(diagnostics_in)) {}

double stage_objective(const ValidatedGame& game, int player, int own_type, const Distribution& row,
                       const GammaProfile& profile, const BeliefVector& belief,
                       const ContinuationFn& continuation, int t, const FixedPointConfig& config) {
  StageEvaluator eval(game, t, belief, continuation, config);
  auto av = eval.evaluate(profile);
  if (row.size() != av[player][own_type].size()) {
    throw DimensionMismatch("row width does not match the player's action space");
  }
  return av[player][own_type].dot(row.vec());
}

Distribution best_response_row(const ValidatedGame& game, int player, int own_type,
                               const GammaProfile& profile, const BeliefVector& belief,
                               const ContinuationFn& continuation, int t,
                               const FixedPointConfig& config) {
  StageEvaluator eval(game, t, belief, continuation, config);
  auto av = eval.evaluate(profile);
  return tie_uniform(av[player][own_type], config.argmax_tolerance);
}

StageSolution solve_stage_fixed_point(const ValidatedGame& game, int t, const BeliefVector& belief,
                                      const ContinuationFn& continuation,
                                      const FixedPointConfig& config) {
  const auto seeds = make_seeds(game, config);
  std::vector<SeedDiagnostic> diagnostics;
  for (size_t s = 0; s < seeds.size(); ++s) {
    SeedRun run = run_seed(game, t, belief, continuation, config, seeds[s], static_cast<int>(s));
    if (run.converged) return std::move(run.solution);
    diagnostics.push_back(run.diagnostic);
  }
  throw NoFixedPointFound(t, belief, std::move(diagnostics));
}

std::vector<StageSolution> enumerate_stage_fixed_points(const ValidatedGame& game, int t,
                                                        const BeliefVector& belief,
                                                        const ContinuationFn& continuation,
                                                        const FixedPointConfig& config,
                                                        double dedup_tolerance) {
  const auto seeds = make_seeds(game, config);
  std::vector<StageSolution> found;
  std::vector<SeedDiagnostic> diagnostics;
  for (size_t s = 0; s < seeds.size(); ++s) {
    SeedRun run = run_seed(game, t, belief, continuation, config, seeds[s], static_cast<int>(s));
    if (!run.converged) {
      diagnostics.push_back(run.diagnostic);
      continue;
    }
    bool duplicate = false;
    for (const auto& other : found) {
      if (other.gamma.distance(run.solution.gamma) <= dedup_tolerance) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) found.push_back(std::move(run.solution));
  }
  if (found.empty()) throw NoFixedPointFound(t, belief, std::move(diagnostics));
  return found;
}

std::shared_ptr<const StageSolution> EquilibriumGenerator::solve(int t, const BeliefVector& belief) {
  if (t == game_.horizon() + 1) {
    auto terminal = std::make_shared<StageSolution>();
    terminal->values.reserve(game_.num_players());
    for (int i = 0; i < game_.num_players(); ++i) {
      terminal->values.push_back(Vector::Zero(game_.num_types(i)));
    }
    return terminal;
  }
  if (t < 1 || t > game_.horizon()) throw DimensionMismatch("stage out of range");

  Key key{t, quantize_key(belief, config_.quantize_resolution)};
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }

  std::shared_ptr<const StageSolution> solution;
  if (oracle_) {
    if (auto gamma = oracle_(t, belief)) {
      StageSolution s;
      s.gamma = std::move(*gamma);
      solution = certify_and_wrap(t, belief, std::move(s));
    }
  }
  if (!solution) {
    StageSolution s = solve_stage_fixed_point(game_, t, belief, continuation_from(t + 1), config_);
    solution = certify_and_wrap(t, belief, std::move(s));
  }

  std::lock_guard<std::mutex> lock(mu_);
  ++solve_count_;
  auto [it, inserted] = memo_.emplace(std::move(key), solution);
  return it->second;  // first writer wins; duplicates are identical
}

std::shared_ptr<const StageSolution> EquilibriumGenerator::certify_and_wrap(
    int t, const BeliefVector& belief, StageSolution solution) {
  const ContinuationFn continuation = continuation_from(t + 1);
  StageEvaluator eval(game_, t, belief, continuation, config_);
  auto av = eval.evaluate(solution.gamma);
  solution.residual = profile_residual(game_, solution.gamma, av);
  if (solution.residual > config_.argmax_tolerance) {
    std::ostringstream os;
    os << "stage solution failed certification at stage " << t << ", belief "
       << belief_to_string(belief) << ": residual " << solution.residual;
    throw Error(os.str());
  }
  solution.values = values_from(game_, solution.gamma, av);
  return std::make_shared<const StageSolution>(std::move(solution));
}

ContinuationFn EquilibriumGenerator::continuation_from(int t) {
  return [this, t](int player, const BeliefVector& belief, int own_type) -> double {
    if (t > game_.horizon()) return 0.0;
    return solve(t, belief)->values[player](own_type);
  };
}

void EquilibriumGenerator::insert(int t, const BeliefVector& belief, StageSolution solution) {
  auto wrapped = certify_and_wrap(t, belief, std::move(solution));
  Key key{t, quantize_key(belief, config_.quantize_resolution)};
  std::lock_guard<std::mutex> lock(mu_);
  memo_[std::move(key)] = std::move(wrapped);
}

int EquilibriumGenerator::solve_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return solve_count_;
}

EquilibriumTree::EquilibriumTree(std::vector<EquilibriumNode> nodes, std::vector<int> action_sizes)
    : nodes_(std::move(nodes)), action_sizes_(std::move(action_sizes)) {
  for (size_t p = 0; p < nodes_.size(); ++p) {
    std::string key;
    for (int a : nodes_[p].history) key += std::to_string(a) + ",";
    index_.emplace(std::move(key), static_cast<int>(p));
  }
}

const EquilibriumNode* EquilibriumTree::find(std::span<const int> history) const {
  std::string key;
  for (int a : history) key += std::to_string(a) + ",";
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

int EquilibriumTree::position(std::span<const int> history) const {
  std::string key;
  for (int a : history) key += std::to_string(a) + ",";
  auto it = index_.find(key);
  if (it == index_.end()) throw Error("no tree node for history of length " + std::to_string(history.size()));
  return it->second;
}

const EquilibriumNode& EquilibriumTree::at(std::span<const int> history) const {
  const EquilibriumNode* node = find(history);
  if (!node) {
    std::string key;
    for (int a : history) key += std::to_string(a) + " ";
    throw Error("no tree node for history [" + key + "]");
  }
  return *node;
}

const EquilibriumNode& EquilibriumTree::child(const EquilibriumNode& node, int joint_action) const {
  std::vector<int> history = node.history;
  history.push_back(joint_action);
  return at(history);
}

bool EquilibriumTree::fully_solved() const {
  return std::all_of(nodes_.begin(), nodes_.end(),
                     [](const EquilibriumNode& n) { return n.solution != nullptr; });
}

Distribution StrategyProfile::row(std::span<const int> history, int player, int own_type) const {
  const EquilibriumNode& node = tree_->at(history);
  if (!node.solution) throw Error("node is unsolved: " + node.failure);
  return node.solution->gamma.of(player).row(own_type);
}

const BeliefVector& BeliefSystem::at(std::span<const int> history) const {
  return tree_->at(history).belief;
}

ForwardConstruction forward_construct(EquilibriumGenerator& generator, int jobs) {
  const ValidatedGame& game = generator.game();
  const int na = game.num_joint_actions();
  const int horizon = game.horizon();

  std::vector<EquilibriumNode> nodes;
  EquilibriumNode root;
  root.t = 1;
  root.belief = BeliefVector::from_priors(game);
  root.solution = generator.solve(1, root.belief);  // root failure propagates
  nodes.push_back(std::move(root));

  size_t level_begin = 0;
  for (int depth = 1; depth < horizon; ++depth) {
    const size_t level_end = nodes.size();
    std::vector<EquilibriumNode> next;
    next.reserve((level_end - level_begin) * na);
    for (size_t p = level_begin; p < level_end; ++p) {
      const EquilibriumNode& parent = nodes[p];
      for (int a = 0; a < na; ++a) {
        EquilibriumNode child;
        child.history = parent.history;
        child.history.push_back(a);
        child.t = depth + 1;
        if (!parent.solution) {
          child.failure = "unsolved ancestor";
        } else {
          child.belief = update_vector(game, parent.belief, parent.solution->gamma, a, depth,
                                       generator.config().degeneracy_tolerance);
        }
        next.push_back(std::move(child));
      }
    }

    auto solve_node = [&](EquilibriumNode& node) {
      if (!node.failure.empty()) return;
      try {
        node.solution = generator.solve(node.t, node.belief);
      } catch (const Error& e) {
        node.failure = e.what();
      }
    };
    if (jobs > 1 && next.size() > 1) {
      std::atomic<size_t> cursor{0};
      auto worker = [&] {
        for (size_t k = cursor.fetch_add(1); k < next.size(); k = cursor.fetch_add(1)) {
          solve_node(next[k]);
        }
      };
      std::vector<std::thread> pool;
      const int width = std::min<int>(jobs, static_cast<int>(next.size()));
      pool.reserve(width);
      for (int w = 0; w < width; ++w) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    } else {
      for (auto& node : next) solve_node(node);
    }

    level_begin = level_end;
    for (auto& node : next) nodes.push_back(std::move(node));
  }

  auto tree = std::make_shared<const EquilibriumTree>(std::move(nodes), game.spec().action_space_sizes);
  return ForwardConstruction{tree, StrategyProfile(tree), BeliefSystem(tree)};
}

}  // namespace spbe
