#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dipsmc/geometry.hpp"
#include "dipsmc/rng.hpp"

namespace dipsmc {

/// Synthetic experiment. Groups:
///   1 one source, fixed location, fixed moment      5 ... bell-shaped moment
///   2 one source, moving location, fixed moment     6 ... bell-shaped moment
///   3 two sources, fixed location, fixed moment     7 ... bell-shaped moment
///   4 two sources, moving location, fixed moment    8 ... bell-shaped moment
struct SimulationSpec {
  int group = 1;
  std::size_t horizon = 30;
  double noise_std = 2.1e-14;   // tesla; mean group-1 SNR about 5
  double walk_radius = 0.02;    // m
  double bell_center = 15.0;    // 1-based time of peak strength
  double bell_width = 4.0;
  double strength = 5e-8;       // A m; fixed strength or bell peak
  std::uint64_t seed = 0;

  std::size_t num_sources() const { return group == 3 || group == 4 || group == 7 || group == 8 ? 2 : 1; }
  bool moving() const { return group % 2 == 0; }
  bool bell_shaped() const { return group >= 5; }

  void validate() const;
};

struct SimulationTruth {
  std::vector<DipoleState> states;
  std::vector<SensorVector> clean_data;
  std::vector<SensorVector> noisy_data;
  double noise_std = 0.0;
};

/// Strength profile at 1-based time t (1 for fixed-moment groups).
double bell_profile(const SimulationSpec& spec, std::size_t t);

SimulationTruth generate(const SimulationSpec& spec, const SourceGrid& grid, const Leadfield& lf);

/// RMS of the clean data divided by the noise standard deviation.
double snr(const SimulationTruth& truth);

}  // namespace dipsmc
