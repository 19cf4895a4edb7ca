#pragma once

#include <cstdint>
#include <string>

namespace dipsmc::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Random discrete HMMs (K <= 5, T <= 6): exact two-filter smoothing against
/// path enumeration (1e-12) and both particle smoothing formulas on
/// exhaustive supports against the exact marginals (1e-10).
CheckResult hmm_exact_equivalence(std::uint64_t seed, int models = 20);

/// Scalar linear-Gaussian model, T = 30: particle filter means against
/// Kalman (5 sd / sqrt(particles)) and both smoothing variants against RTS
/// (5 sd / sqrt(subsample)) at every time; passes when at least
/// `required` of `trials` trials are within tolerance.
CheckResult linear_gaussian_equivalence(std::uint64_t seed, int trials = 20, int required = 19,
                                        std::size_t particles = 5000, std::size_t subsample = 500);

}  // namespace dipsmc::checks
