#pragma once

// Shared test fixtures: deterministic random games and strategies, plus
// brute-force oracles kept independent of the library's computation paths.

#include "spbe/belief.hpp"
#include "spbe/game.hpp"

#include <map>
#include <random>

namespace spbe::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : rng_(seed) {}
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }
  int index(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  Vector simplex(int n) {
    Vector v(n);
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      v(k) = -std::log1p(-unit());
      sum += v(k);
    }
    return v / sum;
  }

 private:
  std::mt19937_64 rng_;
};

struct RandomGameOptions {
  int num_players = 2;
  int horizon = 2;
  int num_types = 2;
  int num_actions = 2;
  double reward_lo = -1.0;
  double reward_hi = 1.0;
  bool static_types = false;     // identity kernels when true
  bool interior_priors = true;   // keep prior mass away from 0
};

inline GameSpec random_game_spec(Rng& rng, const RandomGameOptions& o = {}) {
  GameSpec spec;
  spec.num_players = o.num_players;
  spec.horizon = o.horizon;
  spec.type_space_sizes.assign(o.num_players, o.num_types);
  spec.action_space_sizes.assign(o.num_players, o.num_actions);
  for (int i = 0; i < o.num_players; ++i) {
    Vector p = rng.simplex(o.num_types);
    if (o.interior_priors) {
      p = (p.array() + 0.2).matrix();
      p /= p.sum();
    }
    spec.priors.push_back(std::move(p));
  }
  if (!o.static_types && o.horizon > 1) {
    const int na = spec.num_joint_actions();
    for (int i = 0; i < o.num_players; ++i) {
      std::vector<std::vector<Matrix>> stages;
      for (int t = 0; t + 1 < o.horizon; ++t) {
        std::vector<Matrix> by_action;
        for (int a = 0; a < na; ++a) {
          Matrix k(o.num_types, o.num_types);
          for (int x = 0; x < o.num_types; ++x) k.row(x) = rng.simplex(o.num_types).transpose();
          by_action.push_back(std::move(k));
        }
        stages.push_back(std::move(by_action));
      }
      spec.kernels.push_back(std::move(stages));
    }
  }
  const int ntx = spec.num_joint_types();
  const int na = spec.num_joint_actions();
  for (int i = 0; i < o.num_players; ++i) {
    Matrix r(ntx, na);
    for (int tx = 0; tx < ntx; ++tx) {
      for (int a = 0; a < na; ++a) r(tx, a) = rng.range(o.reward_lo, o.reward_hi);
    }
    spec.rewards.push_back(std::move(r));
  }
  return spec;
}

/// A random full-history strategy: rows are drawn lazily per information set
/// and cached, so repeated queries are consistent within one instance.
class RandomStrategy {
 public:
  RandomStrategy(const ValidatedGame& game, std::uint64_t seed) : game_(game), seed_(seed) {}

  GeneralStrategy strategy() {
    auto cache = std::make_shared<std::map<std::string, Distribution>>();
    const ValidatedGame game = game_;
    const std::uint64_t seed = seed_;
    return [cache, game, seed](int player, int t, std::span<const int> history,
                               std::span<const int> own_types) -> Distribution {
      std::string key = std::to_string(player) + "|" + std::to_string(t) + "|";
      for (int a : history) key += std::to_string(a) + ",";
      key += "|";
      for (int x : own_types) key += std::to_string(x) + ",";
      auto it = cache->find(key);
      if (it != cache->end()) return it->second;
      std::uint64_t h = seed;
      for (char c : key) h = h * 1099511628211ULL + static_cast<unsigned char>(c);
      Rng rng(h);
      Distribution row(rng.simplex(game.num_actions(player)));
      cache->emplace(std::move(key), row);
      return row;
    };
  }

 private:
  ValidatedGame game_;
  std::uint64_t seed_;
};

/// Independent nested-loop oracle for P^g(x_t, a_t): generates every
/// (x_1..x_t, a_1..a_t) tuple with an explicit odometer and multiplies the
/// factors directly.  Deliberately structured unlike the library's recursive
/// walker.
inline Matrix oracle_outcome_distribution(const ValidatedGame& game, const GeneralStrategy& strategy,
                                          int t) {
  const int n = game.num_players();
  const int ntx = game.num_joint_types();
  const int na = game.num_joint_actions();
  Matrix out = Matrix::Zero(ntx, na);

  // Odometer over t joint types and t joint actions.
  std::vector<int> types(t, 0), actions(t, 0);
  for (;;) {
    // Path probability.
    double p = 1.0;
    for (int s = 0; s < t && p != 0.0; ++s) {
      auto xs = game.split_types(types[s]);
      auto as = game.split_actions(actions[s]);
      for (int i = 0; i < n; ++i) {
        if (s == 0) {
          p *= game.prior(i)(xs[i]);
        } else {
          auto prev = game.split_types(types[s - 1]);
          p *= game.kernel(i, s, actions[s - 1])(prev[i], xs[i]);
        }
        if (p == 0.0) break;
        // Strategy row for player i at stage s+1.
        std::vector<int> hist(actions.begin(), actions.begin() + s);
        std::vector<int> own;
        for (int u = 0; u <= s; ++u) own.push_back(game.split_types(types[u])[i]);
        p *= strategy(i, s + 1, hist, own)(as[i]);
        if (p == 0.0) break;
      }
    }
    if (p != 0.0) out(types[t - 1], actions[t - 1]) += p;

    // Advance the odometer.
    int pos = 0;
    for (; pos < 2 * t; ++pos) {
      int& digit = pos < t ? types[pos] : actions[pos - t];
      const int limit = pos < t ? ntx : na;
      if (++digit < limit) break;
      digit = 0;
    }
    if (pos == 2 * t) break;
  }
  return out;
}

inline double oracle_expected_total_reward(const ValidatedGame& game, const GeneralStrategy& strategy,
                                           int player) {
  double total = 0.0;
  for (int t = 1; t <= game.horizon(); ++t) {
    Matrix p = oracle_outcome_distribution(game, strategy, t);
    total += (game.spec().rewards[player].array() * p.array()).sum();
  }
  return total;
}

/// Uniform strategy profile.
inline GeneralStrategy uniform_strategy(const ValidatedGame& game) {
  return [game](int player, int, std::span<const int>, std::span<const int>) {
    return Distribution::uniform(game.num_actions(player));
  };
}

}  // namespace spbe::testing
