#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "dipsmc/geometry.hpp"
#include "dipsmc/model.hpp"
#include "dipsmc/rng.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dipsmc_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline dipsmc::Vector3 random_unit(dipsmc::Rng& rng) {
  std::normal_distribution<double> n;
  dipsmc::Vector3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

// Small but realistic setup: coarse grid in the default sphere, 20 sensors.
struct SmallSetup {
  dipsmc::SourceGrid grid = dipsmc::build_grid(0.09, 0.03, 0.01);
  dipsmc::SensorArray sensors = dipsmc::sensor_cap(20, 0.12, 1.7);
  dipsmc::Leadfield lf = dipsmc::sarvas_leadfield(grid, sensors);

  dipsmc::ModelParams params(double noise_std = 2e-14) const {
    dipsmc::ModelParams p;
    p.noise_cov = dipsmc::isotropic_noise(sensors.size(), noise_std);
    return p;
  }
};

}  // namespace testing
