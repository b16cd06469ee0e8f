#include "spbe/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace spbe {

namespace {

/// Backward DP with state (public node, own type).  With maximize = true it
/// returns the deviator's exact best-response values against the rest of the
/// profile; with maximize = false it follows the player's own rows and
/// returns the equilibrium values.
std::vector<std::vector<double>> player_dp(const ValidatedGame& game, const StrategyProfile& profile,
                                           const BeliefSystem& beliefs, int player, bool maximize) {
  const EquilibriumTree& tree = profile.tree();
  const auto& nodes = tree.nodes();
  const int n = game.num_players();
  const int na_joint = game.num_joint_actions();
  const int nx = game.num_types(player);
  const int na = game.num_actions(player);

  std::vector<int> other_players;
  for (int j = 0; j < n; ++j) {
    if (j != player) other_players.push_back(j);
  }
  std::vector<int> other_sizes;
  for (int j : other_players) other_sizes.push_back(game.num_types(j));
  const int n_other = space_size(other_sizes);

  std::vector<std::vector<double>> values(nodes.size(), std::vector<double>(nx, 0.0));
  for (size_t pos = nodes.size(); pos-- > 0;) {
    const EquilibriumNode& node = nodes[pos];
    if (!node.solution) throw MissingNode("unsolved node in the profile tree");
    const int t = node.t;
    const bool last_stage = t >= game.horizon();
    const BeliefVector& belief = beliefs.at(node.history);

    for (int x = 0; x < nx; ++x) {
      Vector q = Vector::Zero(na);
      std::vector<int> joint_type(n);
      joint_type[player] = x;
      for (int a = 0; a < na_joint; ++a) {
        auto digits = game.split_actions(a);
        double opp_weight = 0.0;
        double reward_exp = 0.0;
        for (int ox = 0; ox < n_other; ++ox) {
          auto od = split_index(ox, other_sizes);
          double w = 1.0;
          for (size_t k = 0; k < other_players.size(); ++k) {
            const int j = other_players[k];
            w *= belief.of(j)(od[k]) *
                 node.solution->gamma.of(j).prob(od[k], digits[j]);
            joint_type[j] = od[k];
          }
          if (w == 0.0) continue;
          opp_weight += w;
          reward_exp += w * game.reward(player, joint_index(joint_type, game.spec().type_space_sizes), a);
        }
        double contribution = reward_exp;
        if (!last_stage && opp_weight > 0.0) {
          const Matrix& k = game.kernel(player, t, a);
          const int child_pos = tree.position(tree.child(node, a).history);
          double cont = 0.0;
          for (int xn = 0; xn < nx; ++xn) {
            if (k(x, xn) == 0.0) continue;
            cont += k(x, xn) * values[child_pos][xn];
          }
          contribution += opp_weight * cont;
        }
        q(digits[player]) += contribution;
      }
      if (maximize) {
        values[pos][x] = q.maxCoeff();
      } else {
        values[pos][x] = q.dot(node.solution->gamma.of(player).row(x).vec());
      }
    }
  }
  return values;
}

/// Enumerates every full history path under a general strategy, invoking
/// `visit(t, public_history, joint_types_now, path_prob)` at each stage
/// point before the stage's actions are drawn.
class PathEnumerator {
 public:
  PathEnumerator(const ValidatedGame& game, const GeneralStrategy& strategy)
      : game_(game), strategy_(strategy), n_(game.num_players()) {}

  template <typename Visit>
  void walk(double cap, Visit&& visit) {
    double est = 1.0;
    const double branch = static_cast<double>(game_.num_joint_types()) * game_.num_joint_actions();
    for (int s = 1; s <= game_.horizon(); ++s) {
      est *= branch;
      if (est > cap) throw EnumerationTooLarge(est);
    }
    types_.assign(n_, {});
    public_history_.clear();
    std::vector<int> x(n_, 0);
    initial_types(0, 1.0, x, std::forward<Visit>(visit));
  }

 private:
  template <typename Visit>
  void initial_types(int player, double prob, std::vector<int>& x, Visit&& visit) {
    if (prob == 0.0) return;
    if (player == n_) {
      for (int i = 0; i < n_; ++i) types_[i].push_back(x[i]);
      stage(1, prob, std::forward<Visit>(visit));
      for (int i = 0; i < n_; ++i) types_[i].pop_back();
      return;
    }
    for (int xi = 0; xi < game_.num_types(player); ++xi) {
      x[player] = xi;
      initial_types(player + 1, prob * game_.prior(player)(xi), x, std::forward<Visit>(visit));
    }
  }

  template <typename Visit>
  void stage(int t, double prob, Visit&& visit) {
    std::vector<int> now(n_);
    for (int i = 0; i < n_; ++i) now[i] = types_[i].back();
    visit(t, public_history_, now, prob, types_);
    if (t >= game_.horizon()) return;

    std::vector<Distribution> rows(n_);
    for (int i = 0; i < n_; ++i) rows[i] = strategy_(i, t, public_history_, types_[i]);
    for (int a = 0; a < game_.num_joint_actions(); ++a) {
      auto digits = game_.split_actions(a);
      double pa = prob;
      for (int i = 0; i < n_; ++i) pa *= rows[i](digits[i]);
      if (pa == 0.0) continue;
      public_history_.push_back(a);
      std::vector<int> next(n_, 0);
      next_types(0, t, pa, a, next, std::forward<Visit>(visit));
      public_history_.pop_back();
    }
  }

  template <typename Visit>
  void next_types(int player, int t, double prob, int joint_action, std::vector<int>& next,
                  Visit&& visit) {
    if (prob == 0.0) return;
    if (player == n_) {
      for (int i = 0; i < n_; ++i) types_[i].push_back(next[i]);
      stage(t + 1, prob, std::forward<Visit>(visit));
      for (int i = 0; i < n_; ++i) types_[i].pop_back();
      return;
    }
    const Matrix& k = game_.kernel(player, t, joint_action);
    const int x = types_[player].back();
    for (int xn = 0; xn < game_.num_types(player); ++xn) {
      next[player] = xn;
      next_types(player + 1, t, prob * k(x, xn), joint_action, next, std::forward<Visit>(visit));
    }
  }

  const ValidatedGame& game_;
  const GeneralStrategy& strategy_;
  int n_;
  std::vector<int> public_history_;
  std::vector<std::vector<int>> types_;
};

}  // namespace

std::map<std::pair<int, int>, double> best_response_values(const ValidatedGame& game,
                                                           const StrategyProfile& profile,
                                                           const BeliefSystem& beliefs, int player) {
  auto table = player_dp(game, profile, beliefs, player, /*maximize=*/true);
  std::map<std::pair<int, int>, double> out;
  for (size_t pos = 0; pos < table.size(); ++pos) {
    for (size_t x = 0; x < table[pos].size(); ++x) {
      out[{static_cast<int>(pos), static_cast<int>(x)}] = table[pos][x];
    }
  }
  return out;
}

VerificationReport check_sequential_rationality(const ValidatedGame& game,
                                                const StrategyProfile& profile,
                                                const BeliefSystem& beliefs, double tolerance) {
  VerificationReport report;
  report.tolerance = tolerance;
  const EquilibriumTree& tree = profile.tree();
  for (const auto& node : tree.nodes()) {
    if (!node.solution) report.uncovered.push_back(node.history);
  }
  if (!report.uncovered.empty()) {
    report.pass = false;
    return report;
  }

  for (int i = 0; i < game.num_players(); ++i) {
    auto br = player_dp(game, profile, beliefs, i, /*maximize=*/true);
    auto eq = player_dp(game, profile, beliefs, i, /*maximize=*/false);
    for (size_t pos = 0; pos < tree.nodes().size(); ++pos) {
      for (int x = 0; x < game.num_types(i); ++x) {
        GapEntry entry;
        entry.player = i;
        entry.history = tree.nodes()[pos].history;
        entry.own_type = x;
        entry.equilibrium_value = eq[pos][x];
        entry.best_response_value = br[pos][x];
        entry.gap = br[pos][x] - eq[pos][x];
        report.max_gap = std::max(report.max_gap, entry.gap);
        report.entries.push_back(std::move(entry));
      }
    }
  }
  report.pass = report.max_gap <= tolerance;
  return report;
}

Distribution TypeMarkovStrategy::row(std::span<const int> history, int own_type) const {
  auto it = rows_.find({std::vector<int>(history.begin(), history.end()), own_type});
  if (it == rows_.end()) return Distribution::uniform(num_actions_);
  return it->second;
}

TypeMarkovStrategy project_to_s(const ValidatedGame& game, const GeneralStrategy& strategy,
                                int player, double cap) {
  std::map<std::pair<std::vector<int>, int>, double> den;
  std::map<std::pair<std::vector<int>, int>, Vector> num;
  const int na = game.num_actions(player);

  PathEnumerator walker(game, strategy);
  walker.walk(cap, [&](int t, const std::vector<int>& history, const std::vector<int>& now,
                       double prob, const std::vector<std::vector<int>>& type_histories) {
    if (t > game.horizon()) return;
    const Distribution row = strategy(player, t, history, type_histories[player]);
    auto key = std::make_pair(history, now[player]);
    den[key] += prob;
    auto [it, fresh] = num.try_emplace(key, Vector::Zero(na));
    it->second += prob * row.vec();
  });

  std::map<std::pair<std::vector<int>, int>, Distribution> rows;
  for (const auto& [key, mass] : num) {
    if (den[key] <= 0.0) continue;
    rows.emplace(key, Distribution(clamp_and_renormalize(mass / den[key])));
  }
  return TypeMarkovStrategy(player, std::move(rows), na);
}

GeneralStrategy with_player_strategy(const GeneralStrategy& profile, const TypeMarkovStrategy& s) {
  const int player = s.player();
  return [profile, s, player](int i, int t, std::span<const int> history,
                              std::span<const int> own_types) -> Distribution {
    if (i == player) return s.row(history, own_types.back());
    return profile(i, t, history, own_types);
  };
}

GeneralStrategy tree_strategy(const StrategyProfile& profile) {
  return [profile](int player, int /*t*/, std::span<const int> history,
                   std::span<const int> own_types) -> Distribution {
    return profile.row(history, player, own_types.back());
  };
}

BeliefConsistency check_belief_consistency_detailed(const ValidatedGame& game,
                                                    const StrategyProfile& profile,
                                                    const BeliefSystem& beliefs, double cap) {
  const GeneralStrategy strategy = tree_strategy(profile);
  std::map<std::vector<int>, Vector> joint;  // history -> unnormalized P(history, x_t)
  const int ntx = game.num_joint_types();

  PathEnumerator walker(game, strategy);
  walker.walk(cap, [&](int t, const std::vector<int>& history, const std::vector<int>& now,
                       double prob, const std::vector<std::vector<int>>&) {
    if (t > game.horizon()) return;
    auto [it, fresh] = joint.try_emplace(history, Vector::Zero(ntx));
    it->second(joint_index(now, game.spec().type_space_sizes)) += prob;
  });

  BeliefConsistency out;
  for (auto& [history, mass] : joint) {
    const double total = mass.sum();
    if (total <= 0.0) continue;
    const BeliefVector& stored = beliefs.at(history);
    double err = 0.0;
    for (int tx = 0; tx < ntx; ++tx) {
      auto digits = split_index(tx, game.spec().type_space_sizes);
      err = std::max(err, std::abs(mass(tx) / total - stored.joint_prob(digits)));
    }
    out.per_node.emplace_back(history, err);
    out.max_error = std::max(out.max_error, err);
  }
  return out;
}

double check_belief_consistency(const ValidatedGame& game, const StrategyProfile& profile,
                                const BeliefSystem& beliefs, double cap) {
  return check_belief_consistency_detailed(game, profile, beliefs, cap).max_error;
}

namespace {

struct ChunkStats {
  std::vector<double> sum;
  std::vector<double> sum_sq;
};

ChunkStats simulate_chunk(const ValidatedGame& game, const StrategyProfile& profile,
                          long long episodes, std::uint64_t seed) {
  const int n = game.num_players();
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto sample = [&](const Vector& p) {
    double u = unit();
    for (Eigen::Index k = 0; k + 1 < p.size(); ++k) {
      u -= p(k);
      if (u < 0) return static_cast<int>(k);
    }
    return static_cast<int>(p.size() - 1);
  };

  ChunkStats stats;
  stats.sum.assign(n, 0.0);
  stats.sum_sq.assign(n, 0.0);
  std::vector<int> types(n), actions(n);
  std::vector<double> total(n);
  for (long long e = 0; e < episodes; ++e) {
    for (int i = 0; i < n; ++i) types[i] = sample(game.prior(i));
    std::fill(total.begin(), total.end(), 0.0);
    const EquilibriumNode* node = &profile.tree().root();
    for (int t = 1; t <= game.horizon(); ++t) {
      if (!node->solution) throw Error("simulation reached an unsolved node");
      for (int i = 0; i < n; ++i) {
        actions[i] = sample(node->solution->gamma.of(i).row(types[i]).vec());
      }
      const int a = joint_index(actions, game.spec().action_space_sizes);
      const int tx = joint_index(types, game.spec().type_space_sizes);
      for (int i = 0; i < n; ++i) total[i] += game.reward(i, tx, a);
      if (t < game.horizon()) {
        for (int i = 0; i < n; ++i) types[i] = sample(game.kernel(i, t, a).row(types[i]));
        node = &profile.tree().child(*node, a);
      }
    }
    for (int i = 0; i < n; ++i) {
      stats.sum[i] += total[i];
      stats.sum_sq[i] += total[i] * total[i];
    }
  }
  return stats;
}

}  // namespace

SimulationResult simulate(const ValidatedGame& game, const StrategyProfile& profile,
                          long long episodes, std::uint64_t rng_seed, int jobs) {
  if (episodes < 1) throw DimensionMismatch("episodes must be at least 1");
  constexpr long long kChunk = 1 << 16;
  const long long num_chunks = (episodes + kChunk - 1) / kChunk;
  std::vector<ChunkStats> chunks(num_chunks);

  auto run_chunk = [&](long long c) {
    const long long count = std::min<long long>(kChunk, episodes - c * kChunk);
    chunks[c] = simulate_chunk(game, profile, count, mix_seed(rng_seed, static_cast<std::uint64_t>(c)));
  };
  if (jobs > 1 && num_chunks > 1) {
    std::atomic<long long> cursor{0};
    auto worker = [&] {
      for (long long c = cursor.fetch_add(1); c < num_chunks; c = cursor.fetch_add(1)) run_chunk(c);
    };
    std::vector<std::thread> pool;
    const int width = std::min<long long>(jobs, num_chunks);
    for (int w = 0; w < width; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  } else {
    for (long long c = 0; c < num_chunks; ++c) run_chunk(c);
  }

  const int n = game.num_players();
  SimulationResult result;
  result.episodes = episodes;
  result.mean.assign(n, 0.0);
  result.stderr_.assign(n, 0.0);
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  for (const auto& c : chunks) {
    for (int i = 0; i < n; ++i) {
      sum[i] += c.sum[i];
      sum_sq[i] += c.sum_sq[i];
    }
  }
  for (int i = 0; i < n; ++i) {
    const double mean = sum[i] / static_cast<double>(episodes);
    result.mean[i] = mean;
    if (episodes > 1) {
      const double var =
          std::max(0.0, (sum_sq[i] - static_cast<double>(episodes) * mean * mean) /
                            static_cast<double>(episodes - 1));
      result.stderr_[i] = std::sqrt(var / static_cast<double>(episodes));
    }
  }
  return result;
}

}  // namespace spbe
