#include "dipsmc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dipsmc {

std::size_t estimate_cardinality(const DipoleCloud& cloud) {
  std::vector<double> hist;
  for (std::size_t l = 0; l < cloud.size(); ++l) {
    const std::size_t n = cloud.particles[l].size();
    if (hist.size() <= n) hist.resize(n + 1, 0.0);
    hist[n] += cloud.weight(l);
  }
  if (hist.empty()) return 0;
  // max_element returns the first maximum, i.e. the smaller count on ties.
  return static_cast<std::size_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
}

Eigen::VectorXd intensity_map(const DipoleCloud& cloud, std::size_t grid_size) {
  Eigen::VectorXd map = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_size));
  for (std::size_t l = 0; l < cloud.size(); ++l) {
    const double w = cloud.weight(l);
    for (const Dipole& d : cloud.particles[l].dipoles) map(static_cast<Eigen::Index>(d.grid_index)) += w;
  }
  return map;
}

std::vector<std::size_t> estimate_locations(const Eigen::VectorXd& map, std::size_t n_hat,
                                            const SourceGrid& grid, double min_separation) {
  std::vector<std::size_t> order;
  for (Eigen::Index g = 0; g < map.size(); ++g) {
    if (map(g) > 0.0) order.push_back(static_cast<std::size_t>(g));
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return map(static_cast<Eigen::Index>(a)) > map(static_cast<Eigen::Index>(b));
  });
  std::vector<std::size_t> picked;
  for (std::size_t g : order) {
    if (picked.size() == n_hat) break;
    const bool clear = std::all_of(picked.begin(), picked.end(), [&](std::size_t p) {
      return (grid[p] - grid[g]).norm() >= min_separation;
    });
    if (clear) picked.push_back(g);
  }
  return picked;
}

Vector3 estimate_moment(const DipoleCloud& cloud, std::size_t location) {
  Vector3 sum = Vector3::Zero();
  double mass = 0.0;
  for (std::size_t l = 0; l < cloud.size(); ++l) {
    const double w = cloud.weight(l);
    for (const Dipole& d : cloud.particles[l].dipoles) {
      if (d.grid_index == location) {
        sum += w * d.moment;
        mass += w;
      }
    }
  }
  if (mass == 0.0) return Vector3::Zero();
  return sum / mass;
}

PointEstimate point_estimate(const DipoleCloud& cloud, const SourceGrid& grid,
                             std::optional<double> min_separation) {
  const double sep = min_separation.value_or(2.0 * grid.spacing);
  PointEstimate est;
  const std::size_t n = estimate_cardinality(cloud);
  est.locations = estimate_locations(intensity_map(cloud, grid.size()), n, grid, sep);
  est.n_hat = est.locations.size();
  for (std::size_t g : est.locations) est.moments.push_back(estimate_moment(cloud, g));
  return est;
}

namespace {

// Minimum over injections of `from` into `to` of the summed distances.
double min_injection_cost(const std::vector<Vector3>& from, const std::vector<Vector3>& to) {
  std::vector<bool> used(to.size(), false);
  double best = std::numeric_limits<double>::infinity();
  auto rec = [&](auto&& self, std::size_t i, double acc) -> void {
    if (acc >= best) return;
    if (i == from.size()) {
      best = acc;
      return;
    }
    for (std::size_t j = 0; j < to.size(); ++j) {
      if (used[j]) continue;
      used[j] = true;
      self(self, i + 1, acc + (from[i] - to[j]).norm());
      used[j] = false;
    }
  };
  rec(rec, 0, 0.0);
  return best;
}

}  // namespace

std::optional<double> localization_error(const std::vector<Vector3>& truth,
                                         const std::vector<Vector3>& estimate) {
  if (estimate.empty()) return std::nullopt;
  const double n_hat = static_cast<double>(estimate.size());
  if (estimate.size() <= truth.size()) return min_injection_cost(estimate, truth) / n_hat;
  // More estimates than sources: match every source, still divide by n_hat.
  return min_injection_cost(truth, estimate) / n_hat;
}

std::optional<double> localization_error(const DipoleState& truth, const PointEstimate& est,
                                         const SourceGrid& grid) {
  std::vector<Vector3> t;
  std::vector<Vector3> e;
  for (const Dipole& d : truth.dipoles) t.push_back(grid[d.grid_index]);
  for (std::size_t g : est.locations) e.push_back(grid[g]);
  return localization_error(t, e);
}

std::vector<CurvePoint> error_curve(const std::vector<std::vector<std::optional<double>>>& errors) {
  std::size_t T = 0;
  for (const auto& run : errors) T = std::max(T, run.size());
  std::vector<CurvePoint> curve(T);
  for (std::size_t t = 0; t < T; ++t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& run : errors) {
      if (t < run.size() && run[t]) {
        sum += *run[t];
        ++n;
      }
    }
    CurvePoint& c = curve[t];
    c.count = n;
    if (n == 0) {
      c.mean = std::numeric_limits<double>::quiet_NaN();
      c.bar = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    c.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& run : errors) {
      if (t < run.size() && run[t]) ss += (*run[t] - c.mean) * (*run[t] - c.mean);
    }
    c.bar = std::sqrt(ss / static_cast<double>(n)) / static_cast<double>(n);
  }
  return curve;
}

std::vector<CurvePoint> error_curve(const std::vector<std::vector<PointEstimate>>& estimates,
                                    const std::vector<std::vector<DipoleState>>& truths,
                                    const SourceGrid& grid) {
  if (estimates.size() != truths.size()) throw std::invalid_argument("runs and truths are not aligned");
  std::vector<std::vector<std::optional<double>>> errors(estimates.size());
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    if (estimates[r].size() != truths[r].size()) {
      throw std::invalid_argument("run horizon differs from truth horizon");
    }
    for (std::size_t t = 0; t < estimates[r].size(); ++t) {
      errors[r].push_back(localization_error(truths[r][t], estimates[r][t], grid));
    }
  }
  return error_curve(errors);
}

}  // namespace dipsmc
