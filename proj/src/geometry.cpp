#include "dipsmc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "dipsmc/errors.hpp"

namespace dipsmc {

namespace {

constexpr double kMu0Over4Pi = 1e-7;

}  // namespace

Leadfield::Leadfield(std::size_t num_points, std::size_t num_sensors)
    : gain_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_sensors),
                                  static_cast<Eigen::Index>(3 * num_points))) {}

Leadfield::Leadfield(Eigen::MatrixXd gain) : gain_(std::move(gain)) {
  if (gain_.cols() % 3 != 0) {
    throw GeometryError("leadfield gain must have 3 columns per grid point");
  }
}

bool DipoleState::operator==(const DipoleState& other) const {
  if (dipoles.size() != other.dipoles.size()) return false;
  std::vector<bool> used(other.dipoles.size(), false);
  for (const Dipole& d : dipoles) {
    bool matched = false;
    for (std::size_t k = 0; k < other.dipoles.size(); ++k) {
      if (!used[k] && other.dipoles[k] == d) {
        used[k] = true;
        matched = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

SourceGrid build_grid(double sphere_radius, double spacing, double inner_margin) {
  if (!(sphere_radius > 0.0)) throw GeometryError("sphere radius must be positive");
  // Coarser than the diameter is allowed: only the origin survives.
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw GeometryError("grid spacing must be positive");
  if (!(inner_margin >= 0.0)) throw GeometryError("inner margin must be non-negative");

  const double limit = sphere_radius - inner_margin;
  const int half = static_cast<int>(std::floor(sphere_radius / spacing));

  SourceGrid grid;
  grid.spacing = spacing;
  grid.sphere_radius = sphere_radius;
  for (int i = -half; i <= half; ++i) {
    for (int j = -half; j <= half; ++j) {
      for (int k = -half; k <= half; ++k) {
        const Vector3 p = spacing * Vector3(i, j, k);
        const double n = p.norm();
        if (n <= limit && n < sphere_radius) grid.points.push_back(p);
      }
    }
  }
  if (grid.points.empty()) {
    throw GeometryError(
        fmt::format("empty grid: no lattice point within radius {} - margin {}", sphere_radius,
                    inner_margin));
  }
  return grid;
}

SensorArray sensor_cap(std::size_t count, double radius, double max_polar_angle) {
  SensorArray sensors;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double z_min = std::cos(max_polar_angle);
  for (std::size_t i = 0; i < count; ++i) {
    // Equal-area spacing in z over [z_min, 1].
    const double z = 1.0 - (1.0 - z_min) * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    const Vector3 u(s * std::cos(phi), s * std::sin(phi), z);
    sensors.positions.push_back(radius * u);
    sensors.orientations.push_back(u);
  }
  return sensors;
}

Vector3 sarvas_field(const Vector3& r0, const Vector3& q, const Vector3& r) {
  const Vector3 a_vec = r - r0;
  const double a = a_vec.norm();
  const double rn = r.norm();
  if (rn == 0.0) throw GeometryError("field point at the conductor centre");
  if (a == 0.0) throw GeometryError("field point coincides with the dipole");

  const double a_dot_r = a_vec.dot(r);
  const double F = a * (rn * a + rn * rn - r0.dot(r));
  if (F == 0.0) throw GeometryError("singular Sarvas geometry");
  const Vector3 grad_F = (a * a / rn + a_dot_r / a + 2.0 * a + 2.0 * rn) * r -
                         (a + 2.0 * rn + a_dot_r / a) * r0;
  const Vector3 q_cross_r0 = q.cross(r0);
  return kMu0Over4Pi / (F * F) * (F * q_cross_r0 - q_cross_r0.dot(r) * grad_F);
}

Leadfield sarvas_leadfield(const SourceGrid& grid, const SensorArray& sensors) {
  const double R = grid.sphere_radius;
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    if (!(sensors.positions[s].norm() > R)) {
      throw GeometryError(fmt::format("sensor {} is not outside the conductor", s));
    }
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!(grid[g].norm() < R)) {
      throw GeometryError(fmt::format("grid point {} is not inside the conductor", g));
    }
  }

  Leadfield lf(grid.size(), sensors.size());
  const Eigen::Matrix3d basis = Eigen::Matrix3d::Identity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto block = lf.block(g);
    for (std::size_t s = 0; s < sensors.size(); ++s) {
      for (int c = 0; c < 3; ++c) {
        block(static_cast<Eigen::Index>(s), c) =
            sensors.orientations[s].dot(sarvas_field(grid[g], basis.col(c), sensors.positions[s]));
      }
    }
  }
  return lf;
}

SensorVector predict_data(const DipoleState& state, const Leadfield& lf) {
  SensorVector out = SensorVector::Zero(static_cast<Eigen::Index>(lf.num_sensors()));
  for (const Dipole& d : state.dipoles) {
    if (d.grid_index >= lf.num_points()) {
      throw GeometryError(fmt::format("dipole grid index {} out of range ({} points)", d.grid_index,
                                      lf.num_points()));
    }
    out.noalias() += lf.block(d.grid_index) * d.moment;
  }
  return out;
}

}  // namespace dipsmc
