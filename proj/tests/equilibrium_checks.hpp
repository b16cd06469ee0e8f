#pragma once

// Enumeration-backed checks shared by the unit tests and the acceptance
// suite.  Everything here recomputes expectations from raw path enumeration
// rather than through the solver's own recursion.

#include "spbe/solver.hpp"
#include "spbe/verify.hpp"

#include "support.hpp"

#include <map>
#include <stdexcept>

namespace spbe::testing {

inline void ec_require(bool cond, const char* what) {
  if (!cond) throw std::runtime_error(std::string("check setup violated: ") + what);
}

struct PathTables {
  // Conditional expected reward-to-go of one player given (public history,
  // current own type): numerator (prob * future reward) and denominator.
  std::map<std::tuple<std::vector<int>, int>, std::pair<double, double>> by_current_type;
  // Same, conditional on the full own type history x^i_{1:t}.
  std::map<std::tuple<std::vector<int>, std::vector<int>>, std::pair<double, double>>
      by_type_history;
};

/// Enumerates every full path under `strategy` and accumulates player
/// `player`'s conditional reward-to-go tables.  `from_next_stage` shifts the
/// reward sum to start one stage after the conditioning point.
inline PathTables reward_to_go_tables(const ValidatedGame& game, const GeneralStrategy& strategy,
                                      int player, bool from_next_stage) {
  const int n = game.num_players();
  const int T = game.horizon();
  const int ntx = game.num_joint_types();
  const int na = game.num_joint_actions();

  PathTables tables;
  std::vector<int> types(T, 0), actions(T, 0);
  for (;;) {
    double p = 1.0;
    std::vector<double> stage_reward(T, 0.0);
    for (int s = 0; s < T && p != 0.0; ++s) {
      auto xs = game.split_types(types[s]);
      auto as = game.split_actions(actions[s]);
      for (int i = 0; i < n && p != 0.0; ++i) {
        if (s == 0) {
          p *= game.prior(i)(xs[i]);
        } else {
          p *= game.kernel(i, s, actions[s - 1])(game.split_types(types[s - 1])[i], xs[i]);
        }
        if (p == 0.0) break;
        std::vector<int> hist(actions.begin(), actions.begin() + s);
        std::vector<int> own;
        for (int u = 0; u <= s; ++u) own.push_back(game.split_types(types[u])[i]);
        p *= strategy(i, s + 1, hist, own)(as[i]);
      }
      stage_reward[s] = game.reward(player, types[s], actions[s]);
    }
    if (p != 0.0) {
      for (int t = 0; t < T; ++t) {
        double togo = 0.0;
        for (int s = from_next_stage ? t + 1 : t; s < T; ++s) togo += stage_reward[s];
        std::vector<int> hist(actions.begin(), actions.begin() + t);
        std::vector<int> own;
        for (int u = 0; u <= t; ++u) own.push_back(game.split_types(types[u])[player]);
        auto& fine = tables.by_type_history[{hist, own}];
        fine.first += p * togo;
        fine.second += p;
        auto& coarse = tables.by_current_type[{hist, own.back()}];
        coarse.first += p * togo;
        coarse.second += p;
      }
    }
    int pos = 0;
    for (; pos < 2 * T; ++pos) {
      int& digit = pos < T ? types[pos] : actions[pos - T];
      const int limit = pos < T ? ntx : na;
      if (++digit < limit) break;
      digit = 0;
    }
    if (pos == 2 * T) break;
  }
  return tables;
}

/// Stored stage values equal the exact conditional reward-to-go under the
/// constructed profile at every positive-probability (node, current type).
inline double value_consistency_error(const ValidatedGame& game, const ForwardConstruction& fc) {
  double worst = 0.0;
  const GeneralStrategy strategy = tree_strategy(fc.strategy);
  for (int i = 0; i < game.num_players(); ++i) {
    PathTables tables = reward_to_go_tables(game, strategy, i, /*from_next_stage=*/false);
    for (const auto& [key, acc] : tables.by_current_type) {
      const auto& [hist, x] = key;
      if (acc.second <= 1e-14) continue;
      const EquilibriumNode& node = fc.tree->at(hist);
      ec_require(node.solution != nullptr, "node.solution");
      const double exact = acc.first / acc.second;
      worst = std::max(worst, std::abs(exact - node.solution->values[i](x)));
    }
  }
  return worst;
}

/// One-step deviation bound: no alternative stage row beats the stored value
/// by more than the tolerance, the continuation being the stored child
/// values along the updated beliefs.
inline double one_step_deviation_gap(const ValidatedGame& game, const ForwardConstruction& fc,
                                           const FixedPointConfig& config) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& node : fc.tree->nodes()) {
    ec_require(node.solution != nullptr, "node.solution");
    ContinuationFn continuation = [&](int player, const BeliefVector& belief, int x) -> double {
      if (node.t + 1 > game.horizon()) return 0.0;
      const BeliefKey want = quantize_key(belief, config.quantize_resolution);
      for (int a = 0; a < game.num_joint_actions(); ++a) {
        const EquilibriumNode& child = fc.tree->child(node, a);
        if (quantize_key(child.belief, config.quantize_resolution) == want) {
          ec_require(child.solution != nullptr, "child.solution");
          return child.solution->values[player](x);
        }
      }
      throw MissingNode("continuation belief not among the node's children");
    };
    for (int i = 0; i < game.num_players(); ++i) {
      for (int x = 0; x < game.num_types(i); ++x) {
        for (int a = 0; a < game.num_actions(i); ++a) {
          const double dev = stage_objective(game, i, x, Distribution::point_mass(a, game.num_actions(i)),
                                             node.solution->gamma, node.belief, continuation, node.t,
                                             config);
          worst = std::max(worst, dev - node.solution->values[i](x));
        }
      }
    }
  }
  return worst;
}

/// Continuation independence: conditional expected reward from stage t+1 on,
/// given (a_{1:t}, x^i_{1:t+1}), does not depend on player i's stage-t row
/// as long as the realized action keeps positive probability.
inline double continuation_independence_diff(const ValidatedGame& game,
                                                   const ForwardConstruction& fc, Rng& rng) {
  double worst = 0.0;
  const GeneralStrategy base = tree_strategy(fc.strategy);
  for (int i = 0; i < game.num_players(); ++i) {
    // Two interior replacement rows for player i at stage 1 (every action
    // keeps positive probability under both).
    std::array<GeneralStrategy, 2> variants;
    for (int k = 0; k < 2; ++k) {
      Vector row = rng.simplex(game.num_actions(i));
      row = (row.array() + 0.25).matrix();
      row /= row.sum();
      Distribution d(row);
      variants[k] = [base, i, d](int player, int t, std::span<const int> hist,
                                 std::span<const int> own) -> Distribution {
        if (player == i && t == 1) return d;
        return base(player, t, hist, own);
      };
    }
    PathTables t0 = reward_to_go_tables(game, variants[0], i, /*from_next_stage=*/true);
    PathTables t1 = reward_to_go_tables(game, variants[1], i, /*from_next_stage=*/true);
    for (const auto& [key, acc0] : t0.by_type_history) {
      const auto& [hist, own] = key;
      if (hist.size() < 1 || acc0.second <= 1e-14) continue;  // condition on a_{1:t} with t >= 1
      auto it = t1.by_type_history.find(key);
      ec_require(it != t1.by_type_history.end(), "it != t1.by_type_history.end()");
      ec_require(it->second.second > 1e-14, "it->second.second > 1e-14");
      worst = std::max(worst,
                       std::abs(acc0.first / acc0.second - it->second.first / it->second.second));
    }
  }
  return worst;
}

/// Builds a full public tree whose prescriptions come from an arbitrary
/// per-node rule, with beliefs propagated through the profile update.
/// Stage values are not populated.
inline ForwardConstruction build_tree_from_gammas(
    const ValidatedGame& game,
    const std::function<GammaProfile(int t, const std::vector<int>& hist, const BeliefVector&)>&
        gamma_at) {
  std::vector<EquilibriumNode> nodes;
  EquilibriumNode root;
  root.t = 1;
  root.belief = BeliefVector::from_priors(game);
  nodes.push_back(std::move(root));
  size_t level_begin = 0;
  for (int depth = 0; depth < game.horizon(); ++depth) {
    const size_t level_end = nodes.size();
    for (size_t p = level_begin; p < level_end; ++p) {
      auto solution = std::make_shared<StageSolution>();
      solution->gamma = gamma_at(nodes[p].t, nodes[p].history, nodes[p].belief);
      for (int i = 0; i < game.num_players(); ++i) {
        solution->values.push_back(Vector::Zero(game.num_types(i)));
      }
      nodes[p].solution = std::move(solution);
      if (depth + 1 >= game.horizon()) continue;
      for (int a = 0; a < game.num_joint_actions(); ++a) {
        EquilibriumNode child;
        child.history = nodes[p].history;
        child.history.push_back(a);
        child.t = depth + 2;
        child.belief =
            update_vector(game, nodes[p].belief, nodes[p].solution->gamma, a, depth + 1);
        nodes.push_back(std::move(child));
      }
    }
    level_begin = level_end;
  }
  auto tree = std::make_shared<const EquilibriumTree>(std::move(nodes),
                                                      game.spec().action_space_sizes);
  return ForwardConstruction{tree, StrategyProfile(tree), BeliefSystem(tree)};
}

/// Exhaustive best response over all deterministic deviation strategies of
/// one player on a two-stage game, conditional on the root and initial type.
/// The deviator may condition the stage-2 action on (a_1, x_1, x_2).
inline double exhaustive_best_response_root(const ValidatedGame& game, const StrategyProfile& profile,
                                            int player, int x1) {
  ec_require(game.horizon() == 2, "game.horizon() == 2");
  const int na = game.num_actions(player);
  const int na_joint = game.num_joint_actions();
  const int nx = game.num_types(player);
  const GeneralStrategy base = tree_strategy(profile);

  // Deterministic continuation: f2(a_joint, x2) -> own action, encoded in a
  // mixed-radix integer; stage-1 action chosen separately.
  double best = -std::numeric_limits<double>::infinity();
  const long long table_count = static_cast<long long>(std::pow(na, na_joint * nx));
  for (int a1 = 0; a1 < na; ++a1) {
    for (long long code = 0; code < table_count; ++code) {
      GeneralStrategy dev = [&, a1, code](int i, int t, std::span<const int> hist,
                                          std::span<const int> own) -> Distribution {
        if (i != player) return base(i, t, hist, own);
        if (t == 1) return Distribution::point_mass(a1, na);
        long long c = code;
        const int slot = hist[0] * nx + own.back();
        for (int k = 0; k < slot; ++k) c /= na;
        return Distribution::point_mass(static_cast<int>(c % na), na);
      };
      // Conditional expected total reward given x1: enumerate paths and
      // condition on the deviator's initial type.
      PathTables tables = reward_to_go_tables(game, dev, player, /*from_next_stage=*/false);
      auto it = tables.by_current_type.find(std::make_tuple(std::vector<int>{}, x1));
      if (it == tables.by_current_type.end() || it->second.second <= 1e-14) continue;
      best = std::max(best, it->second.first / it->second.second);
    }
  }
  return best;
}

}  // namespace spbe::testing
