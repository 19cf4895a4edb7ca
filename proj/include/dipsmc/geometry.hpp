#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace dipsmc {

using Vector3 = Eigen::Vector3d;
using SensorVector = Eigen::VectorXd;

/// Source locations on a cubic lattice inside the conductor. The index of a
/// point is its identity: ordering is lexicographic in lattice coordinates.
struct SourceGrid {
  std::vector<Vector3> points;
  double spacing = 0.0;
  double sphere_radius = 0.0;

  std::size_t size() const noexcept { return points.size(); }
  const Vector3& operator[](std::size_t g) const { return points[g]; }
};

/// Magnetometers outside the conductor: position and unit sensing axis.
struct SensorArray {
  std::vector<Vector3> positions;
  std::vector<Vector3> orientations;

  std::size_t size() const noexcept { return positions.size(); }
};

/// Sensor gain for a unit dipole at each grid point. Stored as a single
/// num_sensors x (3 num_points) matrix; block(g) is a view of its three columns.
class Leadfield {
 public:
  Leadfield() = default;
  Leadfield(std::size_t num_points, std::size_t num_sensors);
  explicit Leadfield(Eigen::MatrixXd gain);

  std::size_t num_points() const noexcept { return static_cast<std::size_t>(gain_.cols() / 3); }
  std::size_t num_sensors() const noexcept { return static_cast<std::size_t>(gain_.rows()); }

  auto block(std::size_t g) const { return gain_.middleCols<3>(3 * static_cast<Eigen::Index>(g)); }
  auto block(std::size_t g) { return gain_.middleCols<3>(3 * static_cast<Eigen::Index>(g)); }

  const Eigen::MatrixXd& gain() const noexcept { return gain_; }

 private:
  Eigen::MatrixXd gain_;
};

struct Dipole {
  std::size_t grid_index = 0;
  Vector3 moment = Vector3::Zero();

  bool operator==(const Dipole& other) const {
    return grid_index == other.grid_index && moment == other.moment;
  }
};

/// The neural current at one time: an unordered collection of dipoles.
/// Equality ignores dipole order.
struct DipoleState {
  std::vector<Dipole> dipoles;

  std::size_t size() const noexcept { return dipoles.size(); }
  bool empty() const noexcept { return dipoles.empty(); }

  bool operator==(const DipoleState& other) const;
};

SourceGrid build_grid(double sphere_radius, double spacing, double inner_margin);

/// Fibonacci-spiral cap of radially oriented magnetometers. Covers polar
/// angles up to `max_polar_angle` (radians) measured from +z.
SensorArray sensor_cap(std::size_t count, double radius, double max_polar_angle);

/// Sarvas field of a current dipole (position r0, moment q) in a homogeneous
/// conducting sphere centred at the origin, evaluated at r outside the sphere.
Vector3 sarvas_field(const Vector3& r0, const Vector3& q, const Vector3& r);

Leadfield sarvas_leadfield(const SourceGrid& grid, const SensorArray& sensors);

Leadfield load_leadfield(const std::filesystem::path& path, const SourceGrid& grid,
                         std::size_t num_sensors);
void save_leadfield(const std::filesystem::path& path, const Leadfield& lf);

SensorArray load_sensors(const std::filesystem::path& path);
void save_sensors(const std::filesystem::path& path, const SensorArray& sensors);

/// Noise-free data: sum of G(r_i) q_i.
SensorVector predict_data(const DipoleState& state, const Leadfield& lf);

}  // namespace dipsmc
