#pragma once

#include "spbe/distribution.hpp"
#include "spbe/game.hpp"

namespace spbe {

/// A prescription for one player: for each own type, a distribution over
/// that player's actions.  Stored as a |X^i| x |A^i| row-stochastic matrix.
class PartialFunction {
 public:
  PartialFunction() = default;
  explicit PartialFunction(Matrix rows);

  int num_types() const { return static_cast<int>(rows_.rows()); }
  int num_actions() const { return static_cast<int>(rows_.cols()); }
  double prob(int own_type, int action) const { return rows_(own_type, action); }
  Distribution row(int own_type) const { return Distribution(rows_.row(own_type)); }
  void set_row(int own_type, const Distribution& d) { rows_.row(own_type) = d.vec(); }
  const Matrix& matrix() const { return rows_; }

  static PartialFunction uniform(int num_types, int num_actions);

 private:
  Matrix rows_;
};

/// One prescription per player.
struct GammaProfile {
  std::vector<PartialFunction> prescriptions;

  int num_players() const { return static_cast<int>(prescriptions.size()); }
  const PartialFunction& of(int player) const { return prescriptions[player]; }
  PartialFunction& of(int player) { return prescriptions[player]; }

  /// Sup-norm distance between two profiles of identical shape.
  double distance(const GammaProfile& o) const;
};

/// The factorized common-information belief state: one marginal per player.
struct BeliefVector {
  std::vector<Distribution> marginals;

  int num_players() const { return static_cast<int>(marginals.size()); }
  const Distribution& of(int player) const { return marginals[player]; }

  /// Product-form joint probability of a joint type profile.
  double joint_prob(std::span<const int> joint_type) const;

  static BeliefVector from_priors(const ValidatedGame& game);
};

constexpr double kDefaultDegeneracyTolerance = 1e-12;

/// One-player Bayes update: posterior over the player's next type given
/// that `own_action` was generated from `pi` through `gamma`, propagated
/// through `kernel` (the |X^i| x |X^i| slice for the realized joint action).
/// When the Bayes denominator is at most `degeneracy_tolerance` the update
/// degenerates to the unconditioned Markov propagation of `pi`.
Distribution update_marginal(const Distribution& pi, const PartialFunction& gamma, int own_action,
                             const Matrix& kernel,
                             double degeneracy_tolerance = kDefaultDegeneracyTolerance);

/// Profile-wise update F: component i is update_marginal for player i under
/// the shared joint action.  `t` is the 1-based stage the action was taken at.
BeliefVector update_vector(const ValidatedGame& game, const BeliefVector& belief,
                           const GammaProfile& gamma, int joint_action, int t,
                           double degeneracy_tolerance = kDefaultDegeneracyTolerance);

constexpr double kDefaultQuantizeResolution = 1e-9;

/// Hashable fixed-point-rounded belief key for memoization.
struct BeliefKey {
  std::vector<std::int64_t> coords;
  bool operator==(const BeliefKey& o) const { return coords == o.coords; }
};

struct BeliefKeyHash {
  std::size_t operator()(const BeliefKey& k) const {
    std::size_t h = k.coords.size();
    for (auto c : k.coords) hash_combine(h, std::hash<std::int64_t>{}(c));
    return h;
  }
};

BeliefKey quantize_key(const BeliefVector& belief, double resolution = kDefaultQuantizeResolution);

/// Reconstructs the belief at the key's grid points; marginal widths are
/// needed to rebuild the per-player split.
BeliefVector dequantize_key(const BeliefKey& key, std::span<const int> type_space_sizes,
                            double resolution = kDefaultQuantizeResolution);

}  // namespace spbe
