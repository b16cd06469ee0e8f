#include "spbe/distribution.hpp"

#include <cmath>

namespace spbe {

bool is_distribution(const Vector& p, double sum_tolerance) {
  if (p.size() == 0) return false;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p(i)) || p(i) < Distribution::kNegativeFloor) return false;
    sum += p(i);
  }
  return std::abs(sum - 1.0) <= sum_tolerance;
}

Vector clamp_and_renormalize(Vector p) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) < 0 && p(i) >= Distribution::kNegativeFloor) p(i) = 0.0;
    sum += p(i);
  }
  if (sum > 0) p /= sum;
  return p;
}

Distribution::Distribution(Vector p, double sum_tolerance) : p_(std::move(p)) {
  if (!is_distribution(p_, sum_tolerance)) {
    throw DimensionMismatch("not a probability vector (size " + std::to_string(p_.size()) + ")");
  }
  for (Eigen::Index i = 0; i < p_.size(); ++i) {
    if (p_(i) < 0) p_(i) = 0.0;
  }
}

Distribution Distribution::point_mass(int index, int size) {
  Vector p = Vector::Zero(size);
  p(index) = 1.0;
  return Distribution(std::move(p));
}

Distribution Distribution::uniform(int size) {
  return Distribution(Vector::Constant(size, 1.0 / size));
}

}  // namespace spbe
