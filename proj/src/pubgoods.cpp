#include "spbe/pubgoods.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <sstream>
#include <thread>

namespace spbe::pubgoods {

namespace {

double cost_of(const Params& params, int type) { return type == kLow ? params.xl : params.xh; }

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

ValidatedGame build_game(const Params& params) {
  if (!params.valid()) {
    throw DimensionMismatch("public goods parameters require 0 < q < 1 and 0 < xl < 1 < xh");
  }
  GameSpec spec;
  spec.num_players = 2;
  spec.horizon = 2;
  spec.type_space_sizes = {2, 2};
  spec.action_space_sizes = {2, 2};
  spec.priors = {Vector(2), Vector(2)};
  spec.priors[0] << 1.0 - params.q, params.q;
  spec.priors[1] << 1.0 - params.q, params.q;
  // Static types: kernels omitted.

  spec.rewards.assign(2, Matrix::Zero(4, 4));
  for (int x1 = 0; x1 < 2; ++x1) {
    for (int x2 = 0; x2 < 2; ++x2) {
      const int tx = x1 * 2 + x2;
      for (int a1 = 0; a1 < 2; ++a1) {
        for (int a2 = 0; a2 < 2; ++a2) {
          const int ta = a1 * 2 + a2;
          spec.rewards[0](tx, ta) =
              a1 == kContribute ? 1.0 - cost_of(params, x1) : static_cast<double>(a2);
          spec.rewards[1](tx, ta) =
              a2 == kContribute ? 1.0 - cost_of(params, x2) : static_cast<double>(a1);
        }
      }
    }
  }
  return validate_game(std::move(spec));
}

GammaProfile profile_from_scalars(double p1l, double p2l, double p1h, double p2h) {
  auto rows = [](double pl, double ph) {
    Matrix m(2, 2);
    m(kLow, kPass) = 1.0 - pl;
    m(kLow, kContribute) = pl;
    m(kHigh, kPass) = 1.0 - ph;
    m(kHigh, kContribute) = ph;
    return PartialFunction(std::move(m));
  };
  GammaProfile gamma;
  gamma.prescriptions.push_back(rows(p1l, p1h));
  gamma.prescriptions.push_back(rows(p2l, p2h));
  return gamma;
}

std::array<double, 4> scalars_from_profile(const GammaProfile& gamma) {
  return {gamma.of(0).prob(kLow, kContribute), gamma.of(1).prob(kLow, kContribute),
          gamma.of(0).prob(kHigh, kContribute), gamma.of(1).prob(kHigh, kContribute)};
}

BeliefVector belief_from_high_mass(double pi1, double pi2) {
  BeliefVector b;
  Vector m1(2), m2(2);
  m1 << 1.0 - pi1, pi1;
  m2 << 1.0 - pi2, pi2;
  b.marginals.emplace_back(std::move(m1));
  b.marginals.emplace_back(std::move(m2));
  return b;
}

std::array<double, 2> high_mass_from_belief(const BeliefVector& belief) {
  return {belief.of(0)(kHigh), belief.of(1)(kHigh)};
}

bool Theta2Solution::matches(const std::array<double, 4>& p, double tol) const {
  for (int k = 0; k < 4; ++k) {
    if (k == free_coord) {
      if (p[k] < free_lo - tol || p[k] > free_hi + tol) return false;
    } else if (std::abs(p[k] - prescription[k]) > tol) {
      return false;
    }
  }
  return true;
}

namespace {

Theta2Solution make_solution(int label, double pi1, double pi2, const Params& params) {
  const double xl = params.xl;
  Theta2Solution s;
  s.label = label;
  switch (label) {
    case 1:
      s.prescription = {0.0, 1.0, 0.0, 0.0};
      s.values[0][kLow] = 1.0 - pi2;
      s.values[0][kHigh] = 1.0 - pi2;
      s.values[1][kLow] = 1.0 - xl;
      s.values[1][kHigh] = 0.0;
      break;
    case 2:
      s.prescription = {1.0, 0.0, 0.0, 0.0};
      s.values[0][kLow] = 1.0 - xl;
      s.values[0][kHigh] = 0.0;
      s.values[1][kLow] = 1.0 - pi1;
      s.values[1][kHigh] = 1.0 - pi1;
      break;
    case 3:
      s.prescription = {1.0, 1.0, 0.0, 0.0};
      s.values[0][kLow] = 1.0 - xl;
      s.values[0][kHigh] = 1.0 - pi2;
      s.values[1][kLow] = 1.0 - xl;
      s.values[1][kHigh] = 1.0 - pi1;
      break;
    case 4: {
      // pi1 == xl; the second coordinate is free.
      const double hi = pi2 < 1.0 ? std::min(1.0, (1.0 - xl) / (1.0 - pi2)) : 1.0;
      s.free_coord = 1;
      s.free_lo = 0.0;
      s.free_hi = hi;
      s.prescription = {1.0, hi, 0.0, 0.0};
      s.values[0][kLow] = 1.0 - xl;
      s.values[0][kHigh] = (1.0 - pi2) * hi;
      s.values[1][kLow] = 1.0 - xl;
      s.values[1][kHigh] = 1.0 - pi1;
      break;
    }
    case 5: {
      // pi2 == xl; the first coordinate is free.
      const double hi = pi1 < 1.0 ? std::min(1.0, (1.0 - xl) / (1.0 - pi1)) : 1.0;
      s.free_coord = 0;
      s.free_lo = 0.0;
      s.free_hi = hi;
      s.prescription = {hi, 1.0, 0.0, 0.0};
      s.values[0][kLow] = 1.0 - xl;
      s.values[0][kHigh] = 1.0 - pi2;
      s.values[1][kLow] = 1.0 - xl;
      s.values[1][kHigh] = (1.0 - pi1) * hi;
      break;
    }
    case 6:
      s.prescription = {(1.0 - xl) / (1.0 - pi1), (1.0 - xl) / (1.0 - pi2), 0.0, 0.0};
      s.values[0][kLow] = 1.0 - xl;
      s.values[0][kHigh] = 1.0 - xl;
      s.values[1][kLow] = 1.0 - xl;
      s.values[1][kHigh] = 1.0 - xl;
      break;
  }
  return s;
}

}  // namespace

std::vector<Theta2Solution> analytic_theta2(double pi1, double pi2, const Params& params) {
  const double xl = params.xl;
  std::vector<Theta2Solution> out;
  if (pi2 <= xl) out.push_back(make_solution(1, pi1, pi2, params));
  if (pi1 <= xl) out.push_back(make_solution(2, pi1, pi2, params));
  if (pi1 >= xl && pi2 >= xl) out.push_back(make_solution(3, pi1, pi2, params));
  if (pi1 == xl) out.push_back(make_solution(4, pi1, pi2, params));
  if (pi2 == xl) out.push_back(make_solution(5, pi1, pi2, params));
  if (pi1 <= xl && pi2 <= xl) out.push_back(make_solution(6, pi1, pi2, params));
  return out;
}

GammaProfile canonical_theta2(double pi1, double pi2, const Params& params) {
  const double xl = params.xl;
  if (pi1 >= 0 && pi1 < xl && pi2 >= 0 && pi2 < xl) {
    return profile_from_scalars((1.0 - xl) / (1.0 - pi1), (1.0 - xl) / (1.0 - pi2), 0.0, 0.0);
  }
  if (pi1 <= xl && pi2 >= xl) return profile_from_scalars(1.0, 0.0, 0.0, 0.0);
  if (pi1 >= xl && pi2 <= xl) return profile_from_scalars(0.0, 1.0, 0.0, 0.0);
  return profile_from_scalars(1.0, 1.0, 0.0, 0.0);
}

PrescriptionOracle canonical_theta2_oracle(const Params& params) {
  return [params](int t, const BeliefVector& belief) -> std::optional<GammaProfile> {
    if (t != 2) return std::nullopt;
    auto [pi1, pi2] = high_mass_from_belief(belief);
    return canonical_theta2(pi1, pi2, params);
  };
}

namespace {

/// Value difference (contribute minus pass) for one low-cost player under
/// the symmetric stage-1 profile (p, p, 0, 0).
double symmetric_indifference(const ValidatedGame& game, double p, const ContinuationFn& cont,
                              const FixedPointConfig& config) {
  GammaProfile profile = profile_from_scalars(p, p, 0.0, 0.0);
  const BeliefVector prior = BeliefVector::from_priors(game);
  const double contribute =
      stage_objective(game, 0, kLow, Distribution::point_mass(kContribute, 2), profile, prior, cont,
                      1, config);
  const double pass = stage_objective(game, 0, kLow, Distribution::point_mass(kPass, 2), profile,
                                      prior, cont, 1, config);
  return contribute - pass;
}

}  // namespace

double symmetric_mixed_p_low(const Params& params) {
  return (1.0 - params.xl) / ((1.0 - params.q) * (1.0 + params.xl));
}

double symmetric_pass_posterior(const Params& params) {
  const double p = symmetric_mixed_p_low(params);
  GammaProfile gamma = profile_from_scalars(p, p, 0.0, 0.0);
  Vector prior(2);
  prior << 1.0 - params.q, params.q;
  Distribution posterior = update_marginal(Distribution(prior), gamma.of(0), kPass,
                                           Matrix::Identity(2, 2));
  return posterior(kHigh);
}

std::vector<StageSolution> solve_stage1(const Params& params, const FixedPointConfig& config) {
  ValidatedGame game = build_game(params);
  EquilibriumGenerator generator(game, config, canonical_theta2_oracle(params));
  const ContinuationFn cont = generator.continuation_from(2);
  const BeliefVector prior = BeliefVector::from_priors(game);

  FixedPointConfig cfg = config;

  // Interior symmetric candidates: sign changes of the low-type indifference
  // function, sharpened by bisection.
  constexpr int kScan = 1000;
  auto phi = [&](double p) { return symmetric_indifference(game, p, cont, config); };
  double prev = phi(0.0);
  for (int k = 1; k <= kScan; ++k) {
    const double p = static_cast<double>(k) / kScan;
    const double cur = phi(p);
    if ((prev > 0) != (cur > 0)) {
      double lo = static_cast<double>(k - 1) / kScan, hi = p;
      double flo = prev;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = phi(mid);
        if ((flo > 0) != (fmid > 0)) {
          hi = mid;
        } else {
          lo = mid;
          flo = fmid;
        }
      }
      const double root = 0.5 * (lo + hi);
      if (root > 0 && root < 1) {
        cfg.extra_seeds.push_back(profile_from_scalars(root, root, 0.0, 0.0));
      }
    }
    prev = cur;
  }

  return enumerate_stage_fixed_points(game, 1, prior, cont, cfg);
}

std::string emit_region_map(double resolution, const Params& params, MapMode mode, int jobs) {
  if (resolution <= 0) throw DimensionMismatch("map resolution must be positive");
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double v = k * resolution;
    if (v > 1.0 + 0.5 * resolution) break;
    grid.push_back(std::min(v, 1.0));
    if (v >= 1.0) break;
  }

  std::vector<std::string> blocks(grid.size());
  auto emit_block = [&](size_t g1) {
    std::string& out = blocks[g1];
    const double pi1 = grid[g1];
    for (double pi2 : grid) {
      GammaProfile gamma = canonical_theta2(pi1, pi2, params);
      auto p = scalars_from_profile(gamma);
      out += format_double(pi1);
      out += ',';
      out += format_double(pi2);
      for (double c : p) {
        out += ',';
        out += format_double(c);
      }
      if (mode == MapMode::kAllSolutions) {
        out += ',';
        auto sols = analytic_theta2(pi1, pi2, params);
        for (size_t s = 0; s < sols.size(); ++s) {
          if (s) out += '|';
          out += std::to_string(sols[s].label);
        }
      }
      out += '\n';
    }
  };

  if (jobs > 1 && grid.size() > 1) {
    std::atomic<size_t> cursor{0};
    auto worker = [&] {
      for (size_t g = cursor.fetch_add(1); g < grid.size(); g = cursor.fetch_add(1)) emit_block(g);
    };
    std::vector<std::thread> pool;
    const int width = std::min<int>(jobs, static_cast<int>(grid.size()));
    for (int w = 0; w < width; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  } else {
    for (size_t g = 0; g < grid.size(); ++g) emit_block(g);
  }

  std::string csv = mode == MapMode::kAllSolutions ? "pi1,pi2,p1L,p2L,p1H,p2H,labels\n"
                                                   : "pi1,pi2,p1L,p2L,p1H,p2H\n";
  for (const auto& b : blocks) csv += b;
  return csv;
}

namespace {

bool profile_near(const StageSolution& sol, const std::array<double, 4>& target, double tol) {
  auto p = scalars_from_profile(sol.gamma);
  for (int k = 0; k < 4; ++k) {
    if (std::abs(p[k] - target[k]) > tol) return false;
  }
  return true;
}

EquilibriumSummary summarize(const Params& params, const ValidatedGame& game,
                             const StageSolution& root, const FixedPointConfig& config) {
  EquilibriumSummary summary;
  summary.stage1 = scalars_from_profile(root.gamma);

  EquilibriumGenerator generator(game, config, canonical_theta2_oracle(params));
  generator.insert(1, BeliefVector::from_priors(game), root);
  ForwardConstruction fc = forward_construct(generator);

  for (int a1 = 0; a1 < 2; ++a1) {
    for (int a2 = 0; a2 < 2; ++a2) {
      const int a = a1 * 2 + a2;
      std::vector<int> history{a};
      summary.mu2[a] = high_mass_from_belief(fc.beliefs.at(history));
    }
  }

  VerificationReport report = check_sequential_rationality(game, fc.strategy, fc.beliefs, 1e-8);
  summary.verifier_max_gap = report.max_gap;
  summary.sequentially_rational = report.pass;
  return summary;
}

}  // namespace

ReproductionReport reproduce_example_equilibria(const Params& params) {
  ReproductionReport report;
  ValidatedGame game = build_game(params);
  FixedPointConfig config;

  std::vector<StageSolution> sols;
  try {
    sols = solve_stage1(params, config);
  } catch (const NoFixedPointFound& e) {
    report.failures.push_back(std::string("stage-1 solve failed: ") + e.what());
    report.pass = false;
    return report;
  }

  const StageSolution* asym = nullptr;
  const StageSolution* twin = nullptr;
  const StageSolution* sym = nullptr;
  const double p_formula = symmetric_mixed_p_low(params);
  for (const auto& sol : sols) {
    if (profile_near(sol, {0, 1, 0, 0}, 1e-6)) asym = &sol;
    if (profile_near(sol, {1, 0, 0, 0}, 1e-6)) twin = &sol;
    if (profile_near(sol, {p_formula, p_formula, 0, 0}, 1e-6)) sym = &sol;
  }
  report.found_asymmetric = asym != nullptr;
  report.found_antisymmetric_twin = twin != nullptr;
  report.found_symmetric_mixed = sym != nullptr;

  if (!asym) report.failures.push_back("revealing asymmetric stage-1 fixed point (0,1,0,0) not found");
  if (!twin) report.failures.push_back("antisymmetric twin (1,0,0,0) not found");
  if (!sym) {
    std::ostringstream os;
    os << "symmetric mixed stage-1 fixed point (" << p_formula << ", " << p_formula
       << ", 0, 0) not found";
    report.failures.push_back(os.str());
  }

  auto expect_belief = [&](const char* label, const std::array<double, 2>& got,
                           const std::array<double, 2>& want, double tol) {
    if (std::abs(got[0] - want[0]) > tol || std::abs(got[1] - want[1]) > tol) {
      std::ostringstream os;
      os << label << ": expected (" << want[0] << ", " << want[1] << "), got (" << got[0] << ", "
         << got[1] << ")";
      report.failures.push_back(os.str());
    }
  };

  if (asym) {
    report.asymmetric = summarize(params, game, *asym, config);
    const double q = params.q;
    expect_belief("asymmetric mu2[00]", report.asymmetric.mu2[0], {q, 1.0}, 1e-12);
    expect_belief("asymmetric mu2[01]", report.asymmetric.mu2[1], {q, 0.0}, 1e-12);
    expect_belief("asymmetric mu2[10]", report.asymmetric.mu2[2], {q, 1.0}, 1e-12);
    expect_belief("asymmetric mu2[11]", report.asymmetric.mu2[3], {q, 0.0}, 1e-12);
    if (!report.asymmetric.sequentially_rational) {
      report.failures.push_back("asymmetric equilibrium failed sequential rationality");
    }
  }
  if (sym) {
    report.symmetric = summarize(params, game, *sym, config);
    report.symmetric_p_low = scalars_from_profile(sym->gamma)[0];
    const double p = symmetric_pass_posterior(params);
    report.symmetric_posterior = p;
    expect_belief("symmetric mu2[00]", report.symmetric.mu2[0], {p, p}, 1e-9);
    expect_belief("symmetric mu2[01]", report.symmetric.mu2[1], {p, 0.0}, 1e-9);
    expect_belief("symmetric mu2[10]", report.symmetric.mu2[2], {0.0, p}, 1e-9);
    expect_belief("symmetric mu2[11]", report.symmetric.mu2[3], {0.0, 0.0}, 1e-9);
    if (std::abs(report.symmetric_p_low - p_formula) > 1e-6) {
      report.failures.push_back("symmetric mixed probability off the closed form");
    }
    if (!report.symmetric.sequentially_rational) {
      report.failures.push_back("symmetric equilibrium failed sequential rationality");
    }
  }

  report.pass = report.failures.empty();
  return report;
}

}  // namespace spbe::pubgoods
