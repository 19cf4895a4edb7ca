#pragma once

// Weighted particle clouds, resampling, and the forward / backward
// (information) particle filters. Both filters are written against the
// StateSpaceModel concept so the same code runs on the dipole model and on
// the exact-inference reference models.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dipsmc/errors.hpp"
#include "dipsmc/rng.hpp"
#include "dipsmc/transition.hpp"

namespace dipsmc {

template <class M>
concept StateSpaceModel = requires(const M& m, Rng& rng, const typename M::State& x,
                                   const typename M::Observation& y, std::size_t t) {
  { m.sample_initial(rng) } -> std::convertible_to<typename M::State>;
  { m.log_initial(x) } -> std::convertible_to<double>;
  { m.sample_gamma(t, rng) } -> std::convertible_to<typename M::State>;
  { m.log_gamma(t, x) } -> std::convertible_to<double>;
  { m.propose_forward(x, rng) } -> std::convertible_to<typename M::State>;
  { m.log_forward_correction(x, x) } -> std::convertible_to<double>;
  { m.propose_backward(x, rng) } -> std::convertible_to<typename M::State>;
  { m.log_backward_proposal(x, x) } -> std::convertible_to<double>;
  { m.log_transition(x, x) } -> std::convertible_to<double>;
  { m.log_likelihood(y, x) } -> std::convertible_to<double>;
};

template <class State>
struct ParticleCloud {
  std::vector<State> particles;
  Eigen::VectorXd log_weights;
  bool normalized = false;

  std::size_t size() const noexcept { return particles.size(); }
  double weight(std::size_t l) const { return std::exp(log_weights(static_cast<Eigen::Index>(l))); }
  Eigen::VectorXd weights() const { return log_weights.array().exp().matrix(); }
};

template <class State>
ParticleCloud<State> uniform_cloud(std::vector<State> particles) {
  ParticleCloud<State> c;
  const auto n = static_cast<Eigen::Index>(particles.size());
  c.particles = std::move(particles);
  c.log_weights = Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));
  c.normalized = true;
  return c;
}

/// Normalises in place; returns log of the mean unnormalised weight.
/// Throws DegenerateError when no particle carries finite weight.
template <class State>
double normalize(ParticleCloud<State>& cloud, std::size_t time_index) {
  for (Eigen::Index l = 0; l < cloud.log_weights.size(); ++l) {
    if (std::isnan(cloud.log_weights(l))) cloud.log_weights(l) = kNegInf;
  }
  const std::span<const double> lw(cloud.log_weights.data(), static_cast<std::size_t>(cloud.log_weights.size()));
  const double lse = log_sum_exp(lw);
  if (!std::isfinite(lse)) throw DegenerateError("filter degenerate", time_index);
  cloud.log_weights.array() -= lse;
  cloud.normalized = true;
  return lse - std::log(static_cast<double>(cloud.log_weights.size()));
}

template <class State>
double effective_sample_size(const ParticleCloud<State>& cloud) {
  if (!cloud.normalized) throw std::invalid_argument("effective_sample_size needs a normalised cloud");
  return 1.0 / (2.0 * cloud.log_weights.array()).exp().sum();
}

enum class ResamplingScheme { multinomial, systematic };

/// Ancestor indices drawn from normalised weights.
inline std::vector<std::size_t> resample_indices(const Eigen::VectorXd& weights, std::size_t count,
                                                 Rng& rng, ResamplingScheme scheme) {
  const auto n = static_cast<std::size_t>(weights.size());
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    acc += weights(static_cast<Eigen::Index>(l));
    cdf[l] = acc;
  }
  for (double& c : cdf) c /= acc;
  cdf.back() = 1.0;

  std::vector<std::size_t> out(count);
  auto locate = [&](double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), n - 1);
  };
  if (scheme == ResamplingScheme::systematic) {
    const double u0 = uniform01(rng);
    for (std::size_t i = 0; i < count; ++i) {
      out[i] = locate((static_cast<double>(i) + u0) / static_cast<double>(count));
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out[i] = locate(uniform01(rng));
  }
  return out;
}

template <class State>
ParticleCloud<State> resample(const ParticleCloud<State>& cloud, Rng& rng,
                              ResamplingScheme scheme = ResamplingScheme::multinomial) {
  if (!cloud.normalized) throw std::invalid_argument("resample needs a normalised cloud");
  const auto idx = resample_indices(cloud.weights(), cloud.size(), rng, scheme);
  std::vector<State> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(cloud.particles[i]);
  return uniform_cloud(std::move(out));
}

enum class Direction { forward, backward };

template <class State>
struct FilterRun {
  Direction direction = Direction::forward;
  /// Normalised weighted clouds, before resampling.
  std::vector<ParticleCloud<State>> clouds;
  /// log L_t: log of the mean unnormalised weight at each time.
  std::vector<double> log_increments;
  std::vector<double> ess;

  std::size_t horizon() const noexcept { return clouds.size(); }
  double log_marginal_likelihood() const {
    double s = 0.0;
    for (double v : log_increments) s += v;
    return s;
  }
};

struct FilterOptions {
  std::size_t particles = 1000;
  std::uint64_t seed = 0;
  ResamplingScheme scheme = ResamplingScheme::multinomial;
};

namespace detail {

inline void check_filter_args(std::size_t horizon, const FilterOptions& opt) {
  if (opt.particles < 2) throw std::invalid_argument("particle filters need at least 2 particles");
  if (horizon < 1) throw std::invalid_argument("particle filters need at least one observation");
}

template <class State>
void finish_step(FilterRun<State>& run, ParticleCloud<State>& cloud, std::size_t t) {
  cloud.normalized = false;
  const double inc = normalize(cloud, t);
  run.ess[t] = effective_sample_size(cloud);
  run.log_increments[t] = inc;
  run.clouds[t] = std::move(cloud);
}

}  // namespace detail

/// Sampling-importance-resampling filter with the model's forward proposal.
/// Resamples at every step.
template <StateSpaceModel Model>
FilterRun<typename Model::State> forward_filter(std::span<const typename Model::Observation> data,
                                                const Model& model, const FilterOptions& opt) {
  using State = typename Model::State;
  const std::size_t T = data.size();
  const std::size_t n = opt.particles;
  detail::check_filter_args(T, opt);

  FilterRun<State> run;
  run.direction = Direction::forward;
  run.clouds.resize(T);
  run.log_increments.resize(T);
  run.ess.resize(T);

  ParticleCloud<State> cloud;
  cloud.particles.resize(n);
  cloud.log_weights.resize(static_cast<Eigen::Index>(n));
  for (std::size_t l = 0; l < n; ++l) {
    Rng rng = make_stream(opt.seed, StreamTag::forward_propose, 0, l);
    cloud.particles[l] = model.sample_initial(rng);
    cloud.log_weights(static_cast<Eigen::Index>(l)) = model.log_likelihood(data[0], cloud.particles[l]);
  }
  detail::finish_step(run, cloud, 0);

  for (std::size_t t = 1; t < T; ++t) {
    Rng rs = make_stream(opt.seed, StreamTag::forward_resample, t);
    const auto anc = resample_indices(run.clouds[t - 1].weights(), n, rs, opt.scheme);
    ParticleCloud<State> next;
    next.particles.resize(n);
    next.log_weights.resize(static_cast<Eigen::Index>(n));
    for (std::size_t l = 0; l < n; ++l) {
      Rng rng = make_stream(opt.seed, StreamTag::forward_propose, t, l);
      const State& prev = run.clouds[t - 1].particles[anc[l]];
      State x = model.propose_forward(prev, rng);
      next.log_weights(static_cast<Eigen::Index>(l)) =
          model.log_likelihood(data[t], x) + model.log_forward_correction(x, prev);
      next.particles[l] = std::move(x);
    }
    detail::finish_step(run, next, t);
  }
  return run;
}

/// Backward information filter targeting p(d_{t:T} | j_t) gamma_t(j_t),
/// normalised. Clouds are indexed by forward time.
template <StateSpaceModel Model>
FilterRun<typename Model::State> backward_filter(std::span<const typename Model::Observation> data,
                                                 const Model& model, const FilterOptions& opt) {
  using State = typename Model::State;
  const std::size_t T = data.size();
  const std::size_t n = opt.particles;
  detail::check_filter_args(T, opt);

  FilterRun<State> run;
  run.direction = Direction::backward;
  run.clouds.resize(T);
  run.log_increments.resize(T);
  run.ess.resize(T);

  ParticleCloud<State> cloud;
  cloud.particles.resize(n);
  cloud.log_weights.resize(static_cast<Eigen::Index>(n));
  for (std::size_t l = 0; l < n; ++l) {
    Rng rng = make_stream(opt.seed, StreamTag::backward_propose, T - 1, l);
    cloud.particles[l] = model.sample_gamma(T - 1, rng);
    cloud.log_weights(static_cast<Eigen::Index>(l)) = model.log_likelihood(data[T - 1], cloud.particles[l]);
  }
  detail::finish_step(run, cloud, T - 1);

  for (std::size_t t = T - 1; t-- > 0;) {
    Rng rs = make_stream(opt.seed, StreamTag::backward_resample, t);
    const auto anc = resample_indices(run.clouds[t + 1].weights(), n, rs, opt.scheme);
    ParticleCloud<State> prev;
    prev.particles.resize(n);
    prev.log_weights.resize(static_cast<Eigen::Index>(n));
    for (std::size_t l = 0; l < n; ++l) {
      Rng rng = make_stream(opt.seed, StreamTag::backward_propose, t, l);
      const State& next = run.clouds[t + 1].particles[anc[l]];
      State x = model.propose_backward(next, rng);
      const double lg = model.log_gamma(t, x);
      double lw = kNegInf;
      if (lg != kNegInf) {
        lw = model.log_likelihood(data[t], x) + model.log_transition(next, x) + lg -
             model.log_gamma(t + 1, next) - model.log_backward_proposal(x, next);
      }
      prev.log_weights(static_cast<Eigen::Index>(l)) = lw;
      prev.particles[l] = std::move(x);
    }
    detail::finish_step(run, prev, t);
  }
  return run;
}

}  // namespace dipsmc
