#pragma once

#include "spbe/common.hpp"
#include "spbe/distribution.hpp"

#include <memory>
#include <optional>

namespace spbe {

/// Full description of an N-player finite-horizon dynamic game with
/// privately observed, conditionally independent controlled-Markov types and
/// publicly observed actions.
struct GameSpec {
  int num_players = 0;
  int horizon = 0;
  std::vector<int> type_space_sizes;    // |X^i|
  std::vector<int> action_space_sizes;  // |A^i|

  // priors[i](x) = probability that player i's initial type is x.
  std::vector<Vector> priors;

  // kernels[i][t][a] is a |X^i| x |X^i| matrix: row x holds the distribution
  // of player i's next type given current type x and joint action index a,
  // for the transition out of stage t+1 (t = 0..horizon-2).  Empty means
  // static types (identity kernels).
  std::vector<std::vector<std::vector<Matrix>>> kernels;

  // rewards[i] is |joint types| x |joint actions|.
  std::vector<Matrix> rewards;

  int num_joint_types() const { return space_size(type_space_sizes); }
  int num_joint_actions() const { return space_size(action_space_sizes); }
};

struct ValidationIssue {
  std::string code;      // e.g. "NonStochasticRow", "DimensionMismatch"
  std::string location;  // e.g. "kernels[1][0][3] row 2"
  std::string detail;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues);
  std::vector<ValidationIssue> issues;
};

/// Immutable validated game handle.  Construction goes through
/// validate_game(); all solver and verifier entry points take this type.
class ValidatedGame {
 public:
  const GameSpec& spec() const { return *spec_; }
  int num_players() const { return spec_->num_players; }
  int horizon() const { return spec_->horizon; }
  int num_types(int player) const { return spec_->type_space_sizes[player]; }
  int num_actions(int player) const { return spec_->action_space_sizes[player]; }
  int num_joint_types() const { return spec_->num_joint_types(); }
  int num_joint_actions() const { return spec_->num_joint_actions(); }
  const Vector& prior(int player) const { return spec_->priors[player]; }
  double reward(int player, int joint_type, int joint_action) const {
    return spec_->rewards[player](joint_type, joint_action);
  }

  /// Transition matrix for player `player` out of stage `t` (1-based) under
  /// joint action `joint_action`; identity for static types.
  const Matrix& kernel(int player, int t, int joint_action) const;

  std::vector<int> split_types(int joint_type) const {
    return split_index(joint_type, spec_->type_space_sizes);
  }
  std::vector<int> split_actions(int joint_action) const {
    return split_index(joint_action, spec_->action_space_sizes);
  }

 private:
  friend ValidatedGame validate_game(GameSpec spec);
  ValidatedGame(std::shared_ptr<const GameSpec> spec, std::vector<Matrix> identity_kernels)
      : spec_(std::move(spec)), identity_kernels_(std::move(identity_kernels)) {}

  std::shared_ptr<const GameSpec> spec_;
  std::vector<Matrix> identity_kernels_;  // per player, used when kernels omitted
};

/// Collects every violated constraint with its location; empty means valid.
std::vector<ValidationIssue> validate_issues(const GameSpec& spec);

/// Returns a validated handle or throws ValidationError carrying all issues.
ValidatedGame validate_game(GameSpec spec);

/// A fully general behavioral strategy profile: player `i` at stage `t`
/// (1-based) maps the public joint-action history a_{1:t-1} and its private
/// type history x^i_{1:t} to a distribution over its own actions.
using GeneralStrategy = std::function<Distribution(
    int player, int t, std::span<const int> public_history, std::span<const int> own_types)>;

struct JointOutcome {
  std::vector<int> joint_type;
  std::vector<int> joint_action;
};

/// Dense P(x_t, a_t) over joint types x joint actions.
class OutcomeTable {
 public:
  OutcomeTable(Matrix table, std::vector<int> type_sizes, std::vector<int> action_sizes)
      : table_(std::move(table)),
        type_sizes_(std::move(type_sizes)),
        action_sizes_(std::move(action_sizes)) {}

  double prob(const JointOutcome& o) const {
    return table_(joint_index(o.joint_type, type_sizes_), joint_index(o.joint_action, action_sizes_));
  }
  const Matrix& matrix() const { return table_; }

 private:
  Matrix table_;
  std::vector<int> type_sizes_;
  std::vector<int> action_sizes_;
};

constexpr double kDefaultEnumerationCap = 1e7;

/// Exact P^g(x_t, a_t) by summation over all histories.  Throws
/// EnumerationTooLarge when the weighted branch count exceeds `cap`.
OutcomeTable enumerate_outcome_distribution(const ValidatedGame& game, const GeneralStrategy& strategy,
                                            int t, double cap = kDefaultEnumerationCap);

/// J^{i,g} = sum_t E[R^i(X_t, A_t)] under the strategy profile.
double expected_total_reward(const ValidatedGame& game, const GeneralStrategy& strategy, int player,
                             double cap = kDefaultEnumerationCap);

}  // namespace spbe
