#include "spbe/belief.hpp"

#include <cmath>

namespace spbe {

PartialFunction::PartialFunction(Matrix rows) : rows_(std::move(rows)) {
  for (Eigen::Index x = 0; x < rows_.rows(); ++x) {
    if (!is_distribution(rows_.row(x))) {
      throw DimensionMismatch("prescription row " + std::to_string(x) + " is not a distribution");
    }
  }
}

PartialFunction PartialFunction::uniform(int num_types, int num_actions) {
  return PartialFunction(Matrix::Constant(num_types, num_actions, 1.0 / num_actions));
}

double GammaProfile::distance(const GammaProfile& o) const {
  double d = 0.0;
  for (size_t i = 0; i < prescriptions.size(); ++i) {
    d = std::max(d, (prescriptions[i].matrix() - o.prescriptions[i].matrix()).cwiseAbs().maxCoeff());
  }
  return d;
}

double BeliefVector::joint_prob(std::span<const int> joint_type) const {
  double p = 1.0;
  for (size_t i = 0; i < marginals.size(); ++i) p *= marginals[i](joint_type[i]);
  return p;
}

BeliefVector BeliefVector::from_priors(const ValidatedGame& game) {
  BeliefVector b;
  b.marginals.reserve(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) b.marginals.emplace_back(game.prior(i));
  return b;
}

Distribution update_marginal(const Distribution& pi, const PartialFunction& gamma, int own_action,
                             const Matrix& kernel, double degeneracy_tolerance) {
  const int nx = pi.size();
  if (gamma.num_types() != nx || kernel.rows() != nx || kernel.cols() != nx) {
    throw DimensionMismatch("update_marginal inputs disagree on the type space size");
  }
  if (own_action < 0 || own_action >= gamma.num_actions()) {
    throw DimensionMismatch("own_action outside the prescription's action space");
  }

  double denominator = 0.0;
  for (int x = 0; x < nx; ++x) denominator += pi(x) * gamma.prob(x, own_action);

  Vector out = Vector::Zero(nx);
  if (denominator <= degeneracy_tolerance) {
    // Observed action carries no usable likelihood: propagate the prior
    // through the kernel without conditioning.
    for (int x = 0; x < nx; ++x) {
      if (pi(x) == 0.0) continue;
      out += pi(x) * kernel.row(x).transpose();
    }
  } else {
    for (int x = 0; x < nx; ++x) {
      const double w = pi(x) * gamma.prob(x, own_action);
      if (w == 0.0) continue;
      out += w * kernel.row(x).transpose();
    }
    out /= denominator;
  }
  return Distribution(clamp_and_renormalize(std::move(out)));
}

BeliefVector update_vector(const ValidatedGame& game, const BeliefVector& belief,
                           const GammaProfile& gamma, int joint_action, int t,
                           double degeneracy_tolerance) {
  if (belief.num_players() != game.num_players() || gamma.num_players() != game.num_players()) {
    throw DimensionMismatch("belief/profile width does not match the game");
  }
  auto actions = game.split_actions(joint_action);
  BeliefVector next;
  next.marginals.reserve(belief.num_players());
  for (int i = 0; i < belief.num_players(); ++i) {
    next.marginals.push_back(update_marginal(belief.of(i), gamma.of(i), actions[i],
                                             game.kernel(i, t, joint_action), degeneracy_tolerance));
  }
  return next;
}

BeliefKey quantize_key(const BeliefVector& belief, double resolution) {
  if (resolution <= 0) throw DimensionMismatch("quantize resolution must be positive");
  BeliefKey key;
  for (const auto& m : belief.marginals) {
    for (int x = 0; x < m.size(); ++x) {
      key.coords.push_back(static_cast<std::int64_t>(std::llround(m(x) / resolution)));
    }
  }
  return key;
}

BeliefVector dequantize_key(const BeliefKey& key, std::span<const int> type_space_sizes,
                            double resolution) {
  BeliefVector belief;
  size_t pos = 0;
  for (int nx : type_space_sizes) {
    Vector p(nx);
    for (int x = 0; x < nx; ++x) p(x) = static_cast<double>(key.coords.at(pos++)) * resolution;
    // Grid coordinates sum to 1 only up to half a resolution step each.
    const double tol = std::max(Distribution::kDefaultSumTolerance, nx * resolution);
    belief.marginals.emplace_back(Distribution(std::move(p), tol));
  }
  return belief;
}

}  // namespace spbe
