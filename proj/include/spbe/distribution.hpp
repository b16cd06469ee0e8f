#pragma once

#include "spbe/common.hpp"

namespace spbe {

/// A probability vector over a finite set.  Entries must be non-negative
/// (up to -1e-15 of float noise) and sum to 1 within `sum_tolerance`.
class Distribution {
 public:
  static constexpr double kDefaultSumTolerance = 1e-9;
  static constexpr double kNegativeFloor = -1e-15;

  Distribution() = default;
  explicit Distribution(Vector p, double sum_tolerance = kDefaultSumTolerance);

  /// Point mass on `index` in a set of `size` elements.
  static Distribution point_mass(int index, int size);
  static Distribution uniform(int size);

  int size() const { return static_cast<int>(p_.size()); }
  double operator()(int i) const { return p_(i); }
  const Vector& vec() const { return p_; }

  bool operator==(const Distribution& o) const { return p_ == o.p_; }

 private:
  Vector p_;
};

/// True iff `p` is a valid probability vector under the Distribution invariants.
bool is_distribution(const Vector& p, double sum_tolerance = Distribution::kDefaultSumTolerance);

/// Clamps entries in [kNegativeFloor, 0) to zero and renormalizes.
/// Entries below the floor are left for validation to reject.
Vector clamp_and_renormalize(Vector p);

}  // namespace spbe
