#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "dipsmc/geometry.hpp"
#include "dipsmc/rng.hpp"
#include "dipsmc/transition.hpp"

namespace dipsmc {

struct ModelParams {
  std::size_t n_max = 5;
  double poisson_rate = 0.5;
  double p_birth = 1.0 / 100.0;
  double p_single_death = 1.0 / 30.0;
  double q_birth = 1.0 / 3.0;
  double q_death = 1.0 / 3.0;
  DeathRule q_death_rule = DeathRule::constant;
  double rho = 0.005;                 // location kernel std (m)
  double moment_walk_factor = 0.2;    // moment step std = factor * |q|
  double q_min = 1e-9;                // strength bounds (A m)
  double q_max = 1e-7;
  Eigen::MatrixXd noise_cov;          // sensor noise covariance

  BirthDeathRates dynamics() const { return {p_birth, p_single_death, DeathRule::per_dipole}; }
  BirthDeathRates proposal() const { return {q_birth, q_death, q_death_rule}; }

  /// Throws ConfigError naming the first violated constraint.
  void validate(std::size_t num_sensors) const;
};

/// Isotropic noise covariance sigma^2 I.
Eigen::MatrixXd isotropic_noise(std::size_t num_sensors, double sigma);

/// Row-normalised Gaussian location transitions over the grid.
class LocationKernel {
 public:
  LocationKernel() = default;
  LocationKernel(const SourceGrid& grid, double rho);

  std::size_t size() const noexcept { return static_cast<std::size_t>(log_prob_.rows()); }
  double log_prob(std::size_t from, std::size_t to) const {
    return log_prob_(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
  }
  double prob(std::size_t from, std::size_t to) const;
  std::size_t sample(std::size_t from, Rng& rng) const;

 private:
  Eigen::MatrixXd log_prob_;  // (from, to)
  Eigen::MatrixXd cdf_;       // column `from` holds the cumulative row
};

/// Gaussian sensor noise with a precomputed Cholesky factor.
class GaussianNoise {
 public:
  GaussianNoise() = default;
  explicit GaussianNoise(const Eigen::MatrixXd& cov);

  double log_density(const SensorVector& datum, const SensorVector& mean) const;
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(chol_.rows()); }

 private:
  Eigen::MatrixXd chol_;  // lower factor
  double log_norm_ = 0.0;
};

/// Per-dipole pieces of the model: prior of a newborn dipole and the
/// location / moment random walk. Satisfies the Space policy of transition.hpp.
class DipoleSpace {
 public:
  using Item = Dipole;

  /// `kernel` may be null when only the birth pieces are used.
  DipoleSpace(const LocationKernel* kernel, std::size_t grid_size, double q_min, double q_max,
              double walk_factor);

  Dipole sample_birth(Rng& rng) const;
  double log_birth(const Dipole& d) const;
  Dipole sample_move(const Dipole& from, Rng& rng) const;
  double log_move(const Dipole& from, const Dipole& to) const;

  double moment_step_std(const Vector3& q) const;

 private:
  const LocationKernel* kernel_;
  std::size_t grid_size_;
  double q_min_;
  double q_max_;
  double walk_factor_;
  double log_strength_range_;
};

/// Truncated Poisson log-probabilities for n = 0..n_max.
std::vector<double> cardinality_log_prior(double rate, std::size_t n_max);

DipoleState sample_prior(Rng& rng, const ModelParams& params, const SourceGrid& grid);
double prior_logpdf(const DipoleState& state, const ModelParams& params, const SourceGrid& grid);

DipoleState sample_transition(Rng& rng, const DipoleState& state, const ModelParams& params,
                              const LocationKernel& kernel, const BirthDeathRates& rates);
double transition_logpdf(const DipoleState& next, const DipoleState& prev, const ModelParams& params,
                         const LocationKernel& kernel, const BirthDeathRates& rates);

double likelihood_logpdf(const SensorVector& datum, const DipoleState& state, const Leadfield& lf,
                         const GaussianNoise& noise);

/// Everything the filters need for the dipole problem. The auxiliary
/// densities of the backward filter are the initial prior at every time.
class DipoleModel {
 public:
  using State = DipoleState;
  using Observation = SensorVector;

  DipoleModel(ModelParams params, SourceGrid grid, Leadfield lf);

  DipoleModel(const DipoleModel&) = delete;
  DipoleModel& operator=(const DipoleModel&) = delete;

  const ModelParams& params() const noexcept { return params_; }
  const SourceGrid& grid() const noexcept { return grid_; }
  const Leadfield& leadfield() const noexcept { return lf_; }
  const LocationKernel& kernel() const noexcept { return kernel_; }
  const GaussianNoise& noise() const noexcept { return noise_; }

  State sample_initial(Rng& rng) const;
  double log_initial(const State& x) const;
  State sample_gamma(std::size_t t, Rng& rng) const;
  double log_gamma(std::size_t t, const State& x) const;

  State propose_forward(const State& prev, Rng& rng) const;
  /// log p(next | prev) - log eta(next | prev)
  double log_forward_correction(const State& next, const State& prev) const;
  State propose_backward(const State& next, Rng& rng) const;
  /// log eta(prev | next) for the backward-running proposal
  double log_backward_proposal(const State& prev, const State& next) const;
  double log_transition(const State& next, const State& prev) const;
  double log_likelihood(const Observation& datum, const State& x) const;

 private:
  static ModelParams checked(ModelParams params, std::size_t num_sensors);

  ModelParams params_;
  SourceGrid grid_;
  Leadfield lf_;
  LocationKernel kernel_;
  GaussianNoise noise_;
  DipoleSpace space_;
  std::vector<double> card_log_prior_;
};

}  // namespace dipsmc
