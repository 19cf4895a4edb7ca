#include "dipsmc/simgen.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "dipsmc/errors.hpp"

namespace dipsmc {

namespace {

constexpr int kMaxWalkAttempts = 100;

Vector3 random_direction(Rng& rng) {
  std::normal_distribution<double> n01;
  Vector3 v;
  do {
    v = Vector3(n01(rng), n01(rng), n01(rng));
  } while (v.squaredNorm() == 0.0);
  return v.normalized();
}

// Grid points within `radius` of `current` (closed ball, current excluded)
// that move away from `previous`, when there is one.
std::vector<std::size_t> admissible_steps(const SourceGrid& grid, std::size_t current,
                                          const std::size_t* previous, double radius) {
  std::vector<std::size_t> out;
  const Vector3& c = grid[current];
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (g == current || (grid[g] - c).norm() > radius) continue;
    if (previous) {
      const Vector3& p = grid[*previous];
      if (!((grid[g] - p).norm() > (c - p).norm())) continue;
    }
    out.push_back(g);
  }
  return out;
}

bool try_walk(const SourceGrid& grid, std::size_t start, std::size_t T, double radius, Rng& rng,
              std::vector<std::size_t>& path) {
  path.assign(1, start);
  while (path.size() < T) {
    const std::size_t* prev = path.size() >= 2 ? &path[path.size() - 2] : nullptr;
    const auto options = admissible_steps(grid, path.back(), prev, radius);
    if (options.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    path.push_back(options[pick(rng)]);
  }
  return true;
}

}  // namespace

void SimulationSpec::validate() const {
  if (group < 1 || group > 8) throw ConfigError(fmt::format("group must be in 1..8, got {}", group));
  if (horizon < 3) throw ConfigError("horizon must be at least 3");
  if (!(noise_std > 0.0)) throw ConfigError("noise_std must be positive");
  if (!(walk_radius > 0.0)) throw ConfigError("walk_radius must be positive");
  if (!(bell_width > 0.0)) throw ConfigError("bell_width must be positive");
  if (!(strength > 0.0)) throw ConfigError("strength must be positive");
}

double bell_profile(const SimulationSpec& spec, std::size_t t) {
  if (!spec.bell_shaped()) return 1.0;
  const double d = static_cast<double>(t) - spec.bell_center;
  return std::exp(-d * d / (2.0 * spec.bell_width * spec.bell_width));
}

SimulationTruth generate(const SimulationSpec& spec, const SourceGrid& grid, const Leadfield& lf) {
  spec.validate();
  const std::size_t n_src = spec.num_sources();
  if (grid.size() < n_src) throw ConfigError("grid has fewer points than sources");
  const std::size_t T = spec.horizon;
  Rng rng = make_stream(spec.seed, StreamTag::simulation);

  std::uniform_int_distribution<std::size_t> uniform_point(0, grid.size() - 1);
  std::vector<std::vector<std::size_t>> paths(n_src);
  std::vector<Vector3> moments(n_src);
  for (std::size_t s = 0; s < n_src; ++s) {
    std::size_t start = uniform_point(rng);
    for (std::size_t k = 0; k < s; ++k) {
      while (start == paths[k].front()) start = uniform_point(rng);
    }
    moments[s] = spec.strength * random_direction(rng);
    if (!spec.moving()) {
      paths[s].assign(T, start);
      continue;
    }
    bool ok = false;
    for (int attempt = 0; attempt < kMaxWalkAttempts && !ok; ++attempt) {
      ok = try_walk(grid, start, T, spec.walk_radius, rng, paths[s]);
    }
    if (!ok) {
      throw ConfigError(fmt::format("random walk trapped after {} attempts (walk_radius {} m, grid spacing {} m)",
                                    kMaxWalkAttempts, spec.walk_radius, grid.spacing));
    }
  }

  SimulationTruth truth;
  truth.noise_std = spec.noise_std;
  std::normal_distribution<double> n01;
  for (std::size_t t = 0; t < T; ++t) {
    DipoleState state;
    const double profile = bell_profile(spec, t + 1);
    for (std::size_t s = 0; s < n_src; ++s) state.dipoles.push_back({paths[s][t], profile * moments[s]});
    SensorVector clean = predict_data(state, lf);
    SensorVector noisy = clean;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy(i) += spec.noise_std * n01(rng);
    truth.states.push_back(std::move(state));
    truth.clean_data.push_back(std::move(clean));
    truth.noisy_data.push_back(std::move(noisy));
  }
  return truth;
}

double snr(const SimulationTruth& truth) {
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto& d : truth.clean_data) {
    ss += d.squaredNorm();
    n += static_cast<std::size_t>(d.size());
  }
  if (n == 0 || ss == 0.0) return 0.0;
  return std::sqrt(ss / static_cast<double>(n)) / truth.noise_std;
}

}  // namespace dipsmc
