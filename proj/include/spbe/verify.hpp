#pragma once

#include "spbe/solver.hpp"

namespace spbe {

class MissingNode : public Error {
 public:
  explicit MissingNode(const std::string& what) : Error("missing node: " + what) {}
};

struct GapEntry {
  int player;
  std::vector<int> history;
  int own_type;
  double equilibrium_value;
  double best_response_value;
  double gap;
};

struct VerificationReport {
  std::vector<GapEntry> entries;
  double max_gap = 0.0;
  double belief_consistency_max_error = 0.0;
  double tolerance = 0.0;
  std::vector<std::vector<int>> uncovered;  // histories of unsolved nodes
  bool pass = false;
};

/// Exact best-response values of `player` against beta*^{-i} by backward DP
/// over the public tree with private state (node, own type).  The state is
/// sufficient because (a_{1:t-1}, x^i_t) is a controlled Markov process for
/// the deviating player.
std::map<std::pair<int, int>, double> best_response_values(const ValidatedGame& game,
                                                           const StrategyProfile& profile,
                                                           const BeliefSystem& beliefs, int player);

/// Sequential rationality: for every (player, node, type), the best-response
/// value exceeds the equilibrium value (forward evaluation under beta*, mu*)
/// by at most `tolerance`.
VerificationReport check_sequential_rationality(const ValidatedGame& game,
                                                const StrategyProfile& profile,
                                                const BeliefSystem& beliefs,
                                                double tolerance = 1e-8);

/// A type-Markov strategy for one player: (public history, current type) ->
/// action distribution, defined on the enumerated history tree.
class TypeMarkovStrategy {
 public:
  TypeMarkovStrategy(int player, std::map<std::pair<std::vector<int>, int>, Distribution> rows,
                     int num_actions)
      : player_(player), rows_(std::move(rows)), num_actions_(num_actions) {}

  /// Uniform at arguments that had zero probability under the source strategy.
  Distribution row(std::span<const int> history, int own_type) const;
  int player() const { return player_; }

 private:
  int player_;
  std::map<std::pair<std::vector<int>, int>, Distribution> rows_;
  int num_actions_;
};

/// Projects a general strategy of `player` onto a type-Markov strategy:
/// s^i_t(a | a_{1:t-1}, x^i_t) = P^g(a^i_t = a | a_{1:t-1}, x^i_t).
TypeMarkovStrategy project_to_s(const ValidatedGame& game, const GeneralStrategy& strategy,
                                int player, double cap = kDefaultEnumerationCap);

///entry point for substituting one player's strategy within a profile.
GeneralStrategy with_player_strategy(const GeneralStrategy& profile, const TypeMarkovStrategy& s);

/// Wraps a forward-constructed profile as a GeneralStrategy.
GeneralStrategy tree_strategy(const StrategyProfile& profile);

struct BeliefConsistency {
  double max_error = 0.0;
  // Per positive-probability node: sup-norm distance between the brute-force
  // posterior on the joint type and the product of stored marginals.
  std::vector<std::pair<std::vector<int>, double>> per_node;
};

BeliefConsistency check_belief_consistency_detailed(const ValidatedGame& game,
                                                    const StrategyProfile& profile,
                                                    const BeliefSystem& beliefs,
                                                    double cap = kDefaultEnumerationCap);

/// Max over positive-probability nodes of the distance between the
/// brute-force Bayes posterior on x_t given the history and the product of
/// stored marginals.
double check_belief_consistency(const ValidatedGame& game, const StrategyProfile& profile,
                                const BeliefSystem& beliefs, double cap = kDefaultEnumerationCap);

struct SimulationResult {
  std::vector<double> mean;    // per player
  std::vector<double> stderr_; // standard error of the mean
  long long episodes = 0;
};

/// Monte Carlo estimate of the per-player expected total reward under a
/// forward-constructed profile.  Episodes are split into fixed-size chunks
/// with per-chunk RNG streams derived from rng_seed, so the result does not
/// depend on the parallelism degree.
SimulationResult simulate(const ValidatedGame& game, const StrategyProfile& profile,
                          long long episodes, std::uint64_t rng_seed, int jobs = 1);

}  // namespace spbe
