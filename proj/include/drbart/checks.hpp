#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace drbart {

/// Outcome of one Monte Carlo validation.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// 10^5 trees at alpha = 0.95, beta = 2: every tree stays under the depth
/// cap, single-leaf fraction 0.05 +- 0.005, mean node counts at depths 1 and
/// 2 within 3 SE of 1.9 and 0.9025.
CheckResult check_prior_trees(std::uint64_t seed, int trees = 100000);
/// 10^6 leaf-scale draws at a0 = 1, m_v = 100: |mean log tau| < 0.005,
/// Var(log tau) within 2% of 0.01, KS of per-ensemble sums vs N(0, 1) < 0.02.
CheckResult check_leaf_scale_prior(std::uint64_t seed, int draws = 1000000);
/// a0 = log(sqrt 4)^-2 puts exp(v) in (1/4, 4) with probability 0.95 +- 0.01.
CheckResult check_a0_calibration(std::uint64_t seed, int ensembles = 20000);

std::vector<CheckResult> prior_checks(std::uint64_t seed);

}  // namespace drbart
