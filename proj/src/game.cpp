#include "spbe/game.hpp"

#include <cmath>
#include <sstream>

namespace spbe {

namespace {

constexpr double kSpecRowTolerance = 1e-12;

bool stochastic_row(const Vector& row, double tol) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (!std::isfinite(row(i)) || row(i) < 0.0) return false;
    sum += row(i);
  }
  return std::abs(sum - 1.0) <= tol;
}

std::string issues_summary(const std::vector<ValidationIssue>& issues) {
  std::ostringstream os;
  os << "invalid game spec (" << issues.size() << " issue" << (issues.size() == 1 ? "" : "s") << ")";
  for (const auto& issue : issues) os << "\n  [" << issue.code << "] " << issue.location << ": " << issue.detail;
  return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<ValidationIssue> issues_in)
    : Error(issues_summary(issues_in)), issues(std::move(issues_in)) {}

std::vector<ValidationIssue> validate_issues(const GameSpec& spec) {
  std::vector<ValidationIssue> issues;
  auto add = [&](std::string code, std::string location, std::string detail) {
    issues.push_back({std::move(code), std::move(location), std::move(detail)});
  };

  if (spec.num_players < 1) add("DimensionMismatch", "players", "num_players must be positive");
  if (spec.horizon < 1) add("DimensionMismatch", "horizon", "horizon must be positive");
  const size_t n = static_cast<size_t>(std::max(spec.num_players, 0));
  if (spec.type_space_sizes.size() != n)
    add("DimensionMismatch", "type_spaces", "expected one size per player");
  if (spec.action_space_sizes.size() != n)
    add("DimensionMismatch", "action_spaces", "expected one size per player");
  for (size_t i = 0; i < spec.type_space_sizes.size(); ++i)
    if (spec.type_space_sizes[i] < 1)
      add("DimensionMismatch", "type_spaces[" + std::to_string(i) + "]", "size must be positive");
  for (size_t i = 0; i < spec.action_space_sizes.size(); ++i)
    if (spec.action_space_sizes[i] < 1)
      add("DimensionMismatch", "action_spaces[" + std::to_string(i) + "]", "size must be positive");
  if (!issues.empty()) return issues;  // dimensions below depend on the sizes

  if (spec.priors.size() != n) {
    add("DimensionMismatch", "priors", "expected one prior per player");
  } else {
    for (size_t i = 0; i < n; ++i) {
      if (spec.priors[i].size() != spec.type_space_sizes[i]) {
        add("DimensionMismatch", "priors[" + std::to_string(i) + "]",
            "length must equal the player's type space size");
      } else if (!stochastic_row(spec.priors[i], kSpecRowTolerance)) {
        add("NonStochasticRow", "priors[" + std::to_string(i) + "]",
            "entries must be non-negative and sum to 1 within 1e-12");
      }
    }
  }

  const int na = spec.num_joint_actions();
  if (!spec.kernels.empty()) {
    if (spec.kernels.size() != n) {
      add("DimensionMismatch", "kernels", "expected one kernel set per player");
    } else {
      for (size_t i = 0; i < n; ++i) {
        const int nx = spec.type_space_sizes[i];
        if (static_cast<int>(spec.kernels[i].size()) != spec.horizon - 1) {
          add("DimensionMismatch", "kernels[" + std::to_string(i) + "]",
              "expected horizon-1 stages");
          continue;
        }
        for (size_t t = 0; t < spec.kernels[i].size(); ++t) {
          if (static_cast<int>(spec.kernels[i][t].size()) != na) {
            add("DimensionMismatch", "kernels[" + std::to_string(i) + "][" + std::to_string(t) + "]",
                "expected one matrix per joint action");
            continue;
          }
          for (int a = 0; a < na; ++a) {
            const Matrix& k = spec.kernels[i][t][a];
            if (k.rows() != nx || k.cols() != nx) {
              add("DimensionMismatch",
                  "kernels[" + std::to_string(i) + "][" + std::to_string(t) + "][" + std::to_string(a) + "]",
                  "expected a |X^i| x |X^i| matrix");
              continue;
            }
            for (int x = 0; x < nx; ++x) {
              if (!stochastic_row(k.row(x), kSpecRowTolerance)) {
                add("NonStochasticRow",
                    "kernels[" + std::to_string(i) + "][" + std::to_string(t) + "][" + std::to_string(a) +
                        "] row " + std::to_string(x),
                    "entries must be non-negative and sum to 1 within 1e-12");
              }
            }
          }
        }
      }
    }
  }

  const int ntx = spec.num_joint_types();
  if (spec.rewards.size() != n) {
    add("DimensionMismatch", "rewards", "expected one table per player");
  } else {
    for (size_t i = 0; i < n; ++i) {
      const Matrix& r = spec.rewards[i];
      if (r.rows() != ntx || r.cols() != na) {
        add("DimensionMismatch", "rewards[" + std::to_string(i) + "]",
            "expected a |joint types| x |joint actions| table");
        continue;
      }
      if (!r.allFinite())
        add("DimensionMismatch", "rewards[" + std::to_string(i) + "]", "entries must be finite");
    }
  }

  return issues;
}

ValidatedGame validate_game(GameSpec spec) {
  auto issues = validate_issues(spec);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  std::vector<Matrix> identity;
  identity.reserve(spec.type_space_sizes.size());
  for (int nx : spec.type_space_sizes) identity.push_back(Matrix::Identity(nx, nx));
  return ValidatedGame(std::make_shared<const GameSpec>(std::move(spec)), std::move(identity));
}

const Matrix& ValidatedGame::kernel(int player, int t, int joint_action) const {
  if (spec_->kernels.empty()) return identity_kernels_[player];
  return spec_->kernels[player][t - 1][joint_action];
}

namespace {

/// Exact forward walk over all histories.  Carries the public joint-action
/// history and every player's full private type history, because general
/// strategies may condition on both.
class HistoryWalker {
 public:
  HistoryWalker(const ValidatedGame& game, const GeneralStrategy& strategy)
      : game_(game), strategy_(strategy), n_(game.num_players()) {}

  /// visit(stage, prob, joint_type, joint_action) is called once per history
  /// path through `target` stages with the exact path probability.
  template <typename Visitor>
  void walk(int target, Visitor&& visit) {
    target_ = target;
    public_history_.clear();
    types_.assign(n_, {});
    std::vector<int> x1(n_, 0);
    enumerate_initial_types(0, 1.0, x1, std::forward<Visitor>(visit));
  }

 private:
  template <typename Visitor>
  void enumerate_initial_types(int player, double prob, std::vector<int>& x, Visitor&& visit) {
    if (prob == 0.0) return;
    if (player == n_) {
      for (int i = 0; i < n_; ++i) types_[i].push_back(x[i]);
      stage(1, prob, std::forward<Visitor>(visit));
      for (int i = 0; i < n_; ++i) types_[i].pop_back();
      return;
    }
    for (int xi = 0; xi < game_.num_types(player); ++xi) {
      x[player] = xi;
      enumerate_initial_types(player + 1, prob * game_.prior(player)(xi), x,
                              std::forward<Visitor>(visit));
    }
  }

  template <typename Visitor>
  void stage(int t, double prob, Visitor&& visit) {
    std::vector<Distribution> rows(n_);
    for (int i = 0; i < n_; ++i) rows[i] = strategy_(i, t, public_history_, types_[i]);
    const int na = game_.num_joint_actions();
    std::vector<int> joint_type(n_);
    for (int i = 0; i < n_; ++i) joint_type[i] = types_[i].back();
    const int tx = joint_index(joint_type, game_.spec().type_space_sizes);

    for (int a = 0; a < na; ++a) {
      auto digits = game_.split_actions(a);
      double pa = prob;
      for (int i = 0; i < n_; ++i) pa *= rows[i](digits[i]);
      if (pa == 0.0) continue;
      if (t == target_) {
        visit(tx, a, pa);
        continue;
      }
      public_history_.push_back(a);
      std::vector<int> next(n_, 0);
      enumerate_next_types(0, t, pa, a, next, std::forward<Visitor>(visit));
      public_history_.pop_back();
    }
  }

  template <typename Visitor>
  void enumerate_next_types(int player, int t, double prob, int joint_action, std::vector<int>& next,
                            Visitor&& visit) {
    if (prob == 0.0) return;
    if (player == n_) {
      for (int i = 0; i < n_; ++i) types_[i].push_back(next[i]);
      stage(t + 1, prob, std::forward<Visitor>(visit));
      for (int i = 0; i < n_; ++i) types_[i].pop_back();
      return;
    }
    const Matrix& k = game_.kernel(player, t, joint_action);
    const int x = types_[player].back();
    for (int xn = 0; xn < game_.num_types(player); ++xn) {
      next[player] = xn;
      enumerate_next_types(player + 1, t, prob * k(x, xn), joint_action, next,
                           std::forward<Visitor>(visit));
    }
  }

  const ValidatedGame& game_;
  const GeneralStrategy& strategy_;
  int n_;
  int target_ = 1;
  std::vector<int> public_history_;
  std::vector<std::vector<int>> types_;
};

void check_enumeration_cap(const ValidatedGame& game, int t, double cap) {
  double est = 1.0;
  const double branch = static_cast<double>(game.num_joint_types()) * game.num_joint_actions();
  for (int s = 1; s <= t; ++s) {
    est *= branch;
    if (est > cap) throw EnumerationTooLarge(est);
  }
}

}  // namespace

OutcomeTable enumerate_outcome_distribution(const ValidatedGame& game, const GeneralStrategy& strategy,
                                            int t, double cap) {
  if (t < 1 || t > game.horizon()) throw DimensionMismatch("stage out of range");
  check_enumeration_cap(game, t, cap);
  Matrix out = Matrix::Zero(game.num_joint_types(), game.num_joint_actions());
  HistoryWalker walker(game, strategy);
  walker.walk(t, [&](int joint_type, int joint_action, double p) { out(joint_type, joint_action) += p; });
  return OutcomeTable(std::move(out), game.spec().type_space_sizes, game.spec().action_space_sizes);
}

double expected_total_reward(const ValidatedGame& game, const GeneralStrategy& strategy, int player,
                             double cap) {
  double total = 0.0;
  for (int t = 1; t <= game.horizon(); ++t) {
    OutcomeTable table = enumerate_outcome_distribution(game, strategy, t, cap);
    total += (game.spec().rewards[player].array() * table.matrix().array()).sum();
  }
  return total;
}

}  // namespace spbe
