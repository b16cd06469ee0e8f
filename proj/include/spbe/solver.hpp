#pragma once

#include "spbe/belief.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>

namespace spbe {

struct FixedPointConfig {
  int max_iterations = 10000;
  double damping = 0.5;                  // lambda in (0, 1]
  double fixed_point_tolerance = 1e-9;   // convergence threshold on the residual
  double argmax_tolerance = 1e-8;        // tie detection and certification slack
  double quantize_resolution = kDefaultQuantizeResolution;
  double degeneracy_tolerance = kDefaultDegeneracyTolerance;

  // Seed plan: all pure prescription profiles when their count is at most
  // pure_seed_cap, otherwise the uniform profile plus num_random_seeds random
  // profiles drawn from rng_seed.  extra_seeds are appended after the
  // generated ones.
  int pure_seed_cap = 4096;
  int num_random_seeds = 32;
  std::uint64_t rng_seed = 0;
  std::vector<GammaProfile> extra_seeds;

  // Selection among converged seeds: first in seed order.
  enum class SelectionRule { kFirstConverged } selection_rule = SelectionRule::kFirstConverged;
};

/// A certified stage fixed point at one (stage, belief) pair: the
/// prescription profile, per-(player, type) values, and the certification
/// residual (sup over rows of the best-response value improvement).
struct StageSolution {
  GammaProfile gamma;
  std::vector<Vector> values;  // values[i](x) = V_t^i(belief, x)
  double residual = 0.0;
  int iterations = 0;
  int seed_id = -1;
};

struct SeedDiagnostic {
  int seed_id = -1;
  double final_residual = 0.0;
  int iterations = 0;
  std::string note;  // set when the seed aborted on a child-solve failure
};

class NoFixedPointFound : public Error {
 public:
  NoFixedPointFound(int t, const BeliefVector& belief, std::vector<SeedDiagnostic> diagnostics);
  int t;
  std::vector<SeedDiagnostic> diagnostics;
};

class MissingContinuation : public Error {
 public:
  explicit MissingContinuation(const std::string& what) : Error(what) {}
};

/// Continuation value lookup: (player, next belief, next own type) -> value.
using ContinuationFn = std::function<double(int player, const BeliefVector&, int own_type)>;

/// Expected stage reward plus continuation for player `player` of type
/// `own_type` playing `row`, while everyone (including the belief update)
/// follows `profile`.  At t == horizon the continuation term vanishes.
double stage_objective(const ValidatedGame& game, int player, int own_type, const Distribution& row,
                       const GammaProfile& profile, const BeliefVector& belief,
                       const ContinuationFn& continuation, int t, const FixedPointConfig& config);

/// Maximizes stage_objective over the row with the profile frozen inside the
/// belief update.  The objective is linear in the row, so the result is the
/// uniform mixture over all actions within argmax_tolerance of the best.
Distribution best_response_row(const ValidatedGame& game, int player, int own_type,
                               const GammaProfile& profile, const BeliefVector& belief,
                               const ContinuationFn& continuation, int t,
                               const FixedPointConfig& config);

/// Damped synchronous best-response iteration from every seed in the plan;
/// returns the first converged seed's certified solution, or throws
/// NoFixedPointFound with per-seed diagnostics.
StageSolution solve_stage_fixed_point(const ValidatedGame& game, int t, const BeliefVector& belief,
                                      const ContinuationFn& continuation,
                                      const FixedPointConfig& config);

/// Like solve_stage_fixed_point but collects every converged seed's solution,
/// deduplicated at `dedup_tolerance` in prescription sup norm.
std::vector<StageSolution> enumerate_stage_fixed_points(const ValidatedGame& game, int t,
                                                        const BeliefVector& belief,
                                                        const ContinuationFn& continuation,
                                                        const FixedPointConfig& config,
                                                        double dedup_tolerance = 1e-6);

/// Optional closed-form prescription source consulted before the generic
/// fixed-point search.  A returned profile is certified and its values are
/// computed from the recursion before being stored; a failed certification
/// is an error, not a fallback.
using PrescriptionOracle =
    std::function<std::optional<GammaProfile>(int t, const BeliefVector& belief)>;

/// Memoized equilibrium generating function: (stage, quantized belief) ->
/// certified StageSolution.  Thread safe; concurrent solves of the same key
/// are idempotent.
class EquilibriumGenerator {
 public:
  explicit EquilibriumGenerator(ValidatedGame game, FixedPointConfig config = {},
                                PrescriptionOracle oracle = nullptr)
      : game_(std::move(game)), config_(std::move(config)), oracle_(std::move(oracle)) {}

  const ValidatedGame& game() const { return game_; }
  const FixedPointConfig& config() const { return config_; }

  /// V_t(belief, .) per player; t == horizon + 1 returns all zeros.
  /// Solves and memoizes the stage fixed point on demand.
  std::shared_ptr<const StageSolution> solve(int t, const BeliefVector& belief);

  /// Continuation function backed by solve(t, .); returns 0 past the horizon.
  ContinuationFn continuation_from(int t);

  /// Pre-stores an externally produced solution for (t, belief) after
  /// certifying it; used to pin a particular equilibrium at the root.
  void insert(int t, const BeliefVector& belief, StageSolution solution);

  /// Number of fixed-point solves performed (memo misses).
  int solve_count() const;

 private:
  std::shared_ptr<const StageSolution> certify_and_wrap(int t, const BeliefVector& belief,
                                                        StageSolution solution);

  ValidatedGame game_;
  FixedPointConfig config_;
  PrescriptionOracle oracle_;

  struct Key {
    int t;
    BeliefKey belief;
    bool operator==(const Key& o) const { return t == o.t && belief == o.belief; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = BeliefKeyHash{}(k.belief);
      hash_combine(h, std::hash<int>{}(k.t));
      return h;
    }
  };

  mutable std::mutex mu_;
  std::unordered_map<Key, std::shared_ptr<const StageSolution>, KeyHash> memo_;
  int solve_count_ = 0;
};

/// One node of the public-history tree: the belief at the node and the stage
/// solution (absent when the solve failed; the failure is recorded instead).
struct EquilibriumNode {
  std::vector<int> history;  // joint action indices a_{1:t-1}
  int t = 1;
  BeliefVector belief;
  std::shared_ptr<const StageSolution> solution;  // null iff failed
  std::string failure;
};

/// The forward-constructed equilibrium: the full depth-T public tree with
/// beliefs and prescriptions at every node, including zero-probability
/// branches.
class EquilibriumTree {
 public:
  EquilibriumTree(std::vector<EquilibriumNode> nodes, std::vector<int> action_sizes);

  const std::vector<EquilibriumNode>& nodes() const { return nodes_; }
  const EquilibriumNode& root() const { return nodes_.front(); }
  const EquilibriumNode& at(std::span<const int> history) const;
  const EquilibriumNode* find(std::span<const int> history) const;
  int position(std::span<const int> history) const;

  /// Child index arithmetic: nodes are stored in BFS order with full
  /// branching, so children of node n at depth d start at a fixed offset.
  const EquilibriumNode& child(const EquilibriumNode& node, int joint_action) const;

  bool fully_solved() const;

 private:
  std::vector<EquilibriumNode> nodes_;
  std::vector<int> action_sizes_;
  std::unordered_map<std::string, int> index_;  // history key -> node position
};

/// beta*: per (public history, player, own type) action distribution.
class StrategyProfile {
 public:
  explicit StrategyProfile(std::shared_ptr<const EquilibriumTree> tree) : tree_(std::move(tree)) {}
  Distribution row(std::span<const int> history, int player, int own_type) const;
  const EquilibriumTree& tree() const { return *tree_; }

 private:
  std::shared_ptr<const EquilibriumTree> tree_;
};

/// mu*: public history -> belief vector.
class BeliefSystem {
 public:
  explicit BeliefSystem(std::shared_ptr<const EquilibriumTree> tree) : tree_(std::move(tree)) {}
  const BeliefVector& at(std::span<const int> history) const;
  const EquilibriumTree& tree() const { return *tree_; }

 private:
  std::shared_ptr<const EquilibriumTree> tree_;
};

struct ForwardConstruction {
  std::shared_ptr<const EquilibriumTree> tree;
  StrategyProfile strategy;
  BeliefSystem beliefs;
};

/// Forward recursion: enumerates the full public-history tree, solving each
/// node's stage fixed point through the generator.  A NoFixedPointFound at a
/// non-root node marks that node (and implicitly its subtree) unsolved rather
/// than aborting.  `jobs` > 1 fans the first tree level out across threads.
ForwardConstruction forward_construct(EquilibriumGenerator& generator, int jobs = 1);

}  // namespace spbe
