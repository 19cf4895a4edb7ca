#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dipsmc/geometry.hpp"
#include "dipsmc/smc.hpp"

namespace dipsmc {

using DipoleCloud = ParticleCloud<DipoleState>;

struct PointEstimate {
  std::size_t n_hat = 0;
  std::vector<std::size_t> locations;  // grid indices
  std::vector<Vector3> moments;
};

/// Mode of the weighted cardinality histogram; ties go to the smaller count.
std::size_t estimate_cardinality(const DipoleCloud& cloud);

/// Expected number of dipoles at each grid point.
Eigen::VectorXd intensity_map(const DipoleCloud& cloud, std::size_t grid_size);

/// Greedy peak picking: repeatedly take the largest remaining positive value
/// at distance >= min_separation from every location already taken. This is
/// the lexicographically largest separated subset.
std::vector<std::size_t> estimate_locations(const Eigen::VectorXd& map, std::size_t n_hat,
                                            const SourceGrid& grid, double min_separation);

/// Conditional mean moment of the dipoles sitting at `location`; zero when
/// no mass sits there.
Vector3 estimate_moment(const DipoleCloud& cloud, std::size_t location);

/// Cardinality, peaks (separated by 2 grid spacings unless given) and moments.
PointEstimate point_estimate(const DipoleCloud& cloud, const SourceGrid& grid,
                             std::optional<double> min_separation = std::nullopt);

/// Localisation error without cardinality penalty. nullopt when nothing was
/// estimated.
std::optional<double> localization_error(const DipoleState& truth, const PointEstimate& est,
                                         const SourceGrid& grid);
std::optional<double> localization_error(const std::vector<Vector3>& truth,
                                         const std::vector<Vector3>& estimate);

struct CurvePoint {
  std::size_t count = 0;  // runs with a reconstruction
  double mean = 0.0;
  double bar = 0.0;       // population std divided by count
};

/// errors[run][t]; runs may have nullopt at times without reconstruction.
std::vector<CurvePoint> error_curve(const std::vector<std::vector<std::optional<double>>>& errors);

std::vector<CurvePoint> error_curve(const std::vector<std::vector<PointEstimate>>& estimates,
                                    const std::vector<std::vector<DipoleState>>& truths,
                                    const SourceGrid& grid);

}  // namespace dipsmc
