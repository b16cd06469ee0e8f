#pragma once

#include "spbe/verify.hpp"

#include <array>

namespace spbe::pubgoods {

/// Two-player, two-stage public goods game with binary contribute/pass
/// actions and static private costs x^L (low) or x^H (high), drawn i.i.d.
/// with P(high) = q.  Contributing costs x^i; a period pays 1 to everyone
/// if anyone contributed.
struct Params {
  double q = 0.1;
  double xl = 0.2;
  double xh = 1.2;

  bool valid() const { return q > 0 && q < 1 && xl > 0 && xl < 1 && xh > 1; }
};

// Type and action index conventions for this module: type 0 = low cost,
// type 1 = high cost; action 0 = pass, action 1 = contribute.  Belief
// coordinates denote the mass on the high type.
constexpr int kLow = 0;
constexpr int kHigh = 1;
constexpr int kPass = 0;
constexpr int kContribute = 1;

ValidatedGame build_game(const Params& params);

/// Scalar coordinates (p1L, p2L, p1H, p2H) <-> GammaProfile.
GammaProfile profile_from_scalars(double p1l, double p2l, double p1h, double p2h);
std::array<double, 4> scalars_from_profile(const GammaProfile& gamma);

/// Belief-vector <-> (pi1, pi2) mass-on-high coordinates.
BeliefVector belief_from_high_mass(double pi1, double pi2);
std::array<double, 2> high_mass_from_belief(const BeliefVector& belief);

/// One closed-form solution family of the stage-2 fixed point equation.
struct Theta2Solution {
  int label = 0;  // 1..6
  // Prescription coordinates (p1L, p2L, p1H, p2H).  For the boundary
  // families (labels 4 and 5) one coordinate is free within [free_lo,
  // free_hi]; `free_coord` is its index and the stored coordinate holds a
  // representative value.
  std::array<double, 4> prescription{};
  int free_coord = -1;
  double free_lo = 0.0, free_hi = 0.0;
  // values[i][x]: stage-2 value for player i with type x, evaluated at the
  // representative prescription.
  double values[2][2] = {{0, 0}, {0, 0}};

  /// Membership test at tolerance: fixed coordinates within tol, the free
  /// coordinate (if any) within [free_lo - tol, free_hi + tol].
  bool matches(const std::array<double, 4>& p, double tol) const;
};

/// Every solution family applicable at the belief (pi1, pi2) (coordinates
/// are mass on the high type).  Regions overlap on boundaries.
std::vector<Theta2Solution> analytic_theta2(double pi1, double pi2, const Params& params);

/// The single-valued canonical selection used for the worked equilibrium:
/// interior mixing on [0,xl)^2, the revealing pure profiles on the two
/// rectangles, and joint contribution on (xl,1]^2.  Branches are evaluated
/// in that order with exact bracket comparisons.
GammaProfile canonical_theta2(double pi1, double pi2, const Params& params);

/// PrescriptionOracle adapter for the canonical stage-2 selection.
PrescriptionOracle canonical_theta2_oracle(const Params& params);

/// All distinct stage-1 fixed points under the canonical stage-2 selection:
/// generated seeds plus symmetric candidates located by scanning the
/// symmetric low-type indifference function.
std::vector<StageSolution> solve_stage1(const Params& params, const FixedPointConfig& config = {});

enum class MapMode { kAllSolutions, kCanonical };

/// Grid rows over (pi1, pi2) in [0,1]^2 at `resolution`; canonical mode
/// emits the selected prescription, all-solutions mode the applicable
/// label set.  Output is a deterministic CSV string with header
/// pi1,pi2,p1L,p2L,p1H,p2H[,labels].
std::string emit_region_map(double resolution, const Params& params, MapMode mode, int jobs = 1);

struct EquilibriumSummary {
  std::array<double, 4> stage1;              // (p1L, p2L, p1H, p2H)
  std::array<std::array<double, 2>, 4> mu2;  // beliefs after joint actions 00,01,10,11
  double verifier_max_gap = 0.0;
  bool sequentially_rational = false;
};

struct ReproductionReport {
  bool found_asymmetric = false;
  bool found_antisymmetric_twin = false;
  bool found_symmetric_mixed = false;
  double symmetric_p_low = 0.0;        // mixed contribution probability of the low type
  double symmetric_posterior = 0.0;    // belief coordinate after a pass action
  EquilibriumSummary asymmetric;
  EquilibriumSummary symmetric;
  std::vector<std::string> failures;   // human-readable assertion failures
  bool pass = false;
};

/// Runs the full backward/forward pipeline with the canonical stage-2
/// selection and checks the worked example's equilibria: the revealing
/// asymmetric equilibrium and its twin, the symmetric mixed equilibrium with
/// p^L = (1-xl)/((1-q)(1+xl)), the induced beliefs, and sequential
/// rationality of both constructed profiles.
ReproductionReport reproduce_example_equilibria(const Params& params);

/// Expected posterior on the high type after a pass under the symmetric
/// mixed equilibrium; q(1+xl)/(2 xl) by direct Bayes evaluation.
double symmetric_pass_posterior(const Params& params);

/// The symmetric mixed low-type contribution probability, when it exists
/// (xl > q / (2 - q)).
double symmetric_mixed_p_low(const Params& params);

}  // namespace spbe::pubgoods
