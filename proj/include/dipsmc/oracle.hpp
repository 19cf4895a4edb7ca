#pragma once

// Exact references for the particle machinery: Kalman filter and
// Rauch-Tung-Striebel smoother for a scalar linear-Gaussian model, exact
// recursions on small discrete HMMs, and adapters that expose both models to
// the particle filters and smoother.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dipsmc/rng.hpp"
#include "dipsmc/transition.hpp"

namespace dipsmc::oracle {

/// x_{t+1} = a x_t + N(0, q^2),  y_t = c x_t + N(0, r^2),  x_1 ~ N(m0, s0^2).
struct ScalarLGModel {
  double transition = 0.9;
  double transition_std = 1.0;
  double observation = 1.0;
  double observation_std = 1.0;
  double prior_mean = 0.0;
  double prior_std = 2.0;

  void validate() const;
};

struct GaussianMarginals {
  std::vector<double> mean;
  std::vector<double> variance;
};

struct KalmanResult {
  GaussianMarginals filtered;
  GaussianMarginals predicted;       // p(x_t | y_{1:t-1}); t = 1 is the prior
  std::vector<double> log_increments;  // log p(y_t | y_{1:t-1})
};

KalmanResult kalman_filter(const ScalarLGModel& model, std::span<const double> data);

/// Kalman update with several conditionally independent observations of the
/// same state at one time, assimilated in the given order.
KalmanResult kalman_filter_multi(const ScalarLGModel& model,
                                 std::span<const std::vector<double>> data);

GaussianMarginals rts_smoother(const ScalarLGModel& model, const KalmanResult& filtered);
inline GaussianMarginals rts_smoother(const ScalarLGModel& model, std::span<const double> data) {
  return rts_smoother(model, kalman_filter(model, data));
}

std::vector<double> simulate(const ScalarLGModel& model, std::size_t horizon, Rng& rng);

/// K-state HMM with discrete emissions. transition(i, j) = p(j | i).
struct DiscreteHMM {
  Eigen::MatrixXd transition;
  Eigen::MatrixXd emission;  // (state, symbol)
  Eigen::VectorXd initial;

  std::size_t num_states() const { return static_cast<std::size_t>(initial.size()); }
  std::size_t num_symbols() const { return static_cast<std::size_t>(emission.cols()); }
  void validate() const;
};

DiscreteHMM random_hmm(std::size_t states, std::size_t symbols, Rng& rng);
std::vector<std::size_t> simulate(const DiscreteHMM& model, std::size_t horizon, Rng& rng);

struct HmmExact {
  std::vector<Eigen::VectorXd> predictive;        // p(j_t | d_{1:t-1})
  std::vector<Eigen::VectorXd> filtering;         // p(j_t | d_{1:t})
  std::vector<Eigen::VectorXd> backward_info;     // p(d_{t:T} | j_t), unnormalised
  std::vector<Eigen::VectorXd> tilted;            // ~ p(d_{t:T} | j_t) gamma_t(j_t), normalised
  std::vector<Eigen::VectorXd> tilted_future;     // ~ p(d_{t+1:T} | j_t) gamma_t(j_t), normalised
  std::vector<Eigen::VectorXd> smoothing;         // predictive x tilted / gamma
  std::vector<Eigen::VectorXd> smoothing_forward; // filtering x tilted_future / gamma
  std::vector<double> log_increments;             // log p(d_t | d_{1:t-1})
};

/// Exact quantities by direct summation. `gammas` holds one auxiliary
/// distribution per time; empty means the initial distribution everywhere.
HmmExact hmm_exact(const DiscreteHMM& model, std::span<const std::size_t> data,
                   std::span<const Eigen::VectorXd> gammas = {});

/// Posterior marginals by enumerating all K^T paths.
std::vector<Eigen::VectorXd> hmm_path_sum(const DiscreteHMM& model, std::span<const std::size_t> data);

/// Scalar linear-Gaussian model exposed to the particle filters. Bootstrap
/// forward proposal; backward proposal inverts the dynamics:
/// x_t ~ N(x_{t+1} / a, (q / a)^2). Auxiliary densities are the prior.
class LinearGaussianSmc {
 public:
  using State = double;
  using Observation = double;

  explicit LinearGaussianSmc(ScalarLGModel model);

  double sample_initial(Rng& rng) const;
  double log_initial(double x) const;
  double sample_gamma(std::size_t t, Rng& rng) const;
  double log_gamma(std::size_t t, double x) const;
  double propose_forward(double prev, Rng& rng) const;
  double log_forward_correction(double, double) const { return 0.0; }
  double propose_backward(double next, Rng& rng) const;
  double log_backward_proposal(double prev, double next) const;
  double log_transition(double next, double prev) const;
  double log_likelihood(double y, double x) const;

 private:
  ScalarLGModel m_;
};

/// Discrete HMM exposed to the particle filters. The backward proposal uses
/// the column-normalised transition matrix.
class DiscreteHmmSmc {
 public:
  using State = std::size_t;
  using Observation = std::size_t;

  DiscreteHmmSmc(DiscreteHMM model, std::vector<Eigen::VectorXd> gammas = {});

  std::size_t sample_initial(Rng& rng) const;
  double log_initial(std::size_t x) const;
  std::size_t sample_gamma(std::size_t t, Rng& rng) const;
  double log_gamma(std::size_t t, std::size_t x) const;
  std::size_t propose_forward(std::size_t prev, Rng& rng) const;
  double log_forward_correction(std::size_t, std::size_t) const { return 0.0; }
  std::size_t propose_backward(std::size_t next, Rng& rng) const;
  double log_backward_proposal(std::size_t prev, std::size_t next) const;
  double log_transition(std::size_t next, std::size_t prev) const;
  double log_likelihood(std::size_t y, std::size_t x) const;

  const DiscreteHMM& model() const noexcept { return m_; }
  const Eigen::VectorXd& gamma(std::size_t t) const;

 private:
  DiscreteHMM m_;
  std::vector<Eigen::VectorXd> gammas_;
  Eigen::MatrixXd reverse_;  // reverse_(next, prev) = A(prev, next) / sum_i A(i, next)
};

}  // namespace dipsmc::oracle
