#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "dipsmc/geometry.hpp"
#include "dipsmc/model.hpp"
#include "dipsmc/simgen.hpp"
#include "dipsmc/smc.hpp"

namespace dipsmc {

struct GeometryConfig {
  double sphere_radius = 0.09;
  double grid_spacing = 0.015;
  double grid_margin = 0.01;
  std::size_t num_sensors = 60;
  double sensor_radius = 0.12;
  double sensor_cap_angle_deg = 100.0;
  std::string sensor_file;     // overrides the generated cap when set
  std::string leadfield_file;  // overrides the Sarvas leadfield when set
};

/// Everything a batch run needs. Plain key=value text, '#' starts a comment.
struct RunConfig {
  GeometryConfig geometry;
  ModelParams model;  // noise_cov is derived from simulation.noise_std
  SimulationSpec simulation;
  std::size_t particles = 1000;
  std::size_t subsample = 100;
  ResamplingScheme resampling = ResamplingScheme::multinomial;
  std::size_t runs = 20;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  /// Field-level validation; throws ConfigError.
  void validate() const;

  std::uint64_t simulation_seed(std::size_t run) const;
  std::uint64_t inference_seed(std::size_t run) const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string to_text(const RunConfig& config);

/// Grid, sensors and leadfield described by the geometry section.
struct Geometry {
  SourceGrid grid;
  SensorArray sensors;
  Leadfield leadfield;
};
Geometry build_geometry(const GeometryConfig& config);

/// Model parameters with the noise covariance filled in for `num_sensors`.
ModelParams model_params(const RunConfig& config, std::size_t num_sensors);

}  // namespace dipsmc
