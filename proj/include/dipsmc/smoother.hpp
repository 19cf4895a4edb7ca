#pragma once

// Double two-filter smoothing: run forward and backward filters, subsample
// both, build one smoothing approximation on each support, and keep, at every
// time, the one whose underlying filter explained that datum better.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dipsmc/smc.hpp"

namespace dipsmc {

enum class Variant {
  backward_supported,  // particles from the backward filter (p1)
  forward_supported,   // particles from the forward filter (p2)
};

/// Counts transition-density evaluations spent on smoothing weights.
struct EvaluationCounter {
  std::size_t transitions = 0;
};

template <class State>
ParticleCloud<State> subsample(const ParticleCloud<State>& cloud, std::size_t m, Rng& rng) {
  if (!cloud.normalized) throw std::invalid_argument("subsample needs a normalised cloud");
  if (m < 1) throw std::invalid_argument("subsample size must be positive");
  const auto idx = resample_indices(cloud.weights(), m, rng, ResamplingScheme::multinomial);
  std::vector<State> out;
  out.reserve(m);
  for (std::size_t i : idx) out.push_back(cloud.particles[i]);
  return uniform_cloud(std::move(out));
}

namespace detail {

template <class State>
ParticleCloud<State> finish_smoothing(std::vector<State> particles, Eigen::VectorXd log_w,
                                      std::size_t t) {
  ParticleCloud<State> out;
  out.particles = std::move(particles);
  out.log_weights = std::move(log_w);
  const std::span<const double> lw(out.log_weights.data(), static_cast<std::size_t>(out.log_weights.size()));
  const double lse = log_sum_exp(lw);
  if (!std::isfinite(lse)) throw IncompatibleSupportsError(t);
  out.log_weights.array() -= lse;
  out.normalized = true;
  return out;
}

}  // namespace detail

/// Smoothing weights on the backward particles at time t (0-based, t >= 1):
/// w1 ~ w~_t^l * sum_k w_{t-1}^k p(j~_t^l | j_{t-1}^k) / gamma_t(j~_t^l).
template <StateSpaceModel Model>
ParticleCloud<typename Model::State> smooth_on_backward_support(
    const ParticleCloud<typename Model::State>& fwd_prev,
    const ParticleCloud<typename Model::State>& bwd, const Model& model, std::size_t t,
    EvaluationCounter* counter = nullptr) {
  const std::size_t nb = bwd.size();
  const std::size_t nf = fwd_prev.size();
  Eigen::VectorXd log_w(static_cast<Eigen::Index>(nb));
  std::vector<double> terms(nf);
  for (std::size_t l = 0; l < nb; ++l) {
    const auto& x = bwd.particles[l];
    const double lg = model.log_gamma(t, x);
    for (std::size_t k = 0; k < nf; ++k) {
      terms[k] = fwd_prev.log_weights(static_cast<Eigen::Index>(k)) +
                 model.log_transition(x, fwd_prev.particles[k]);
    }
    if (counter) counter->transitions += nf;
    log_w(static_cast<Eigen::Index>(l)) =
        lg == kNegInf ? kNegInf : bwd.log_weights(static_cast<Eigen::Index>(l)) + log_sum_exp(terms) - lg;
  }
  return detail::finish_smoothing(bwd.particles, std::move(log_w), t);
}

/// Backward-supported smoothing at the first time, where the predictive
/// mixture is replaced by the initial prior.
template <StateSpaceModel Model>
ParticleCloud<typename Model::State> smooth_initial_on_backward_support(
    const ParticleCloud<typename Model::State>& bwd, const Model& model) {
  Eigen::VectorXd log_w(static_cast<Eigen::Index>(bwd.size()));
  for (std::size_t l = 0; l < bwd.size(); ++l) {
    const auto& x = bwd.particles[l];
    const double lg = model.log_gamma(0, x);
    log_w(static_cast<Eigen::Index>(l)) =
        lg == kNegInf ? kNegInf : bwd.log_weights(static_cast<Eigen::Index>(l)) + model.log_initial(x) - lg;
  }
  return detail::finish_smoothing(bwd.particles, std::move(log_w), 0);
}

/// Smoothing weights on the forward particles at time t (t <= T-2):
/// w2 ~ w_t^l * sum_k w~_{t+1}^k p(j~_{t+1}^k | j_t^l) / gamma_{t+1}(j~_{t+1}^k).
template <StateSpaceModel Model>
ParticleCloud<typename Model::State> smooth_on_forward_support(
    const ParticleCloud<typename Model::State>& fwd,
    const ParticleCloud<typename Model::State>& bwd_next, const Model& model, std::size_t t,
    EvaluationCounter* counter = nullptr) {
  const std::size_t nf = fwd.size();
  const std::size_t nb = bwd_next.size();
  std::vector<double> bwd_term(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const double lg = model.log_gamma(t + 1, bwd_next.particles[k]);
    bwd_term[k] = lg == kNegInf ? kNegInf : bwd_next.log_weights(static_cast<Eigen::Index>(k)) - lg;
  }
  Eigen::VectorXd log_w(static_cast<Eigen::Index>(nf));
  std::vector<double> terms(nb);
  for (std::size_t l = 0; l < nf; ++l) {
    const auto& x = fwd.particles[l];
    std::size_t evaluated = 0;
    for (std::size_t k = 0; k < nb; ++k) {
      if (bwd_term[k] == kNegInf) {
        terms[k] = kNegInf;
        continue;
      }
      terms[k] = bwd_term[k] + model.log_transition(bwd_next.particles[k], x);
      ++evaluated;
    }
    if (counter) counter->transitions += evaluated;
    log_w(static_cast<Eigen::Index>(l)) = fwd.log_weights(static_cast<Eigen::Index>(l)) + log_sum_exp(terms);
  }
  return detail::finish_smoothing(fwd.particles, std::move(log_w), t);
}

/// Keeps the forward-supported candidate when its filter's log increment is
/// at least the backward one; falls back to whichever candidate exists.
template <class State>
std::pair<ParticleCloud<State>, Variant> select(std::optional<ParticleCloud<State>> p1,
                                                std::optional<ParticleCloud<State>> p2,
                                                double log_lf, double log_lb, std::size_t t) {
  if (!p1 && !p2) throw DegenerateError("both smoothing candidates degenerate", t);
  if (!p1) return {std::move(*p2), Variant::forward_supported};
  if (!p2) return {std::move(*p1), Variant::backward_supported};
  if (log_lf >= log_lb) return {std::move(*p2), Variant::forward_supported};
  return {std::move(*p1), Variant::backward_supported};
}

template <class State>
struct SmoothingRun {
  FilterRun<State> forward;
  FilterRun<State> backward;
  std::vector<ParticleCloud<State>> chosen;
  std::vector<Variant> tags;
  std::vector<std::optional<ParticleCloud<State>>> backward_supported;
  std::vector<std::optional<ParticleCloud<State>>> forward_supported;
  std::vector<std::size_t> backward_evaluations;
  std::vector<std::size_t> forward_evaluations;
  // Times where both candidates were degenerate and a filter cloud was used instead.
  std::vector<bool> fallback;

  std::size_t horizon() const noexcept { return chosen.size(); }
};

struct SmootherOptions {
  std::size_t particles = 1000;
  std::size_t subsample = 100;
  std::uint64_t seed = 0;
  ResamplingScheme scheme = ResamplingScheme::multinomial;
};

template <StateSpaceModel Model>
SmoothingRun<typename Model::State> run_double_smoother(
    std::span<const typename Model::Observation> data, const Model& model, const SmootherOptions& opt) {
  using State = typename Model::State;
  using Cloud = ParticleCloud<State>;
  const std::size_t T = data.size();
  if (T < 2) throw std::invalid_argument("double smoothing needs at least two time points");

  const FilterOptions fopt{opt.particles, opt.seed, opt.scheme};
  SmoothingRun<State> run;
  run.forward = forward_filter(data, model, fopt);
  run.backward = backward_filter(data, model, fopt);

  std::vector<Cloud> fwd_sub(T);
  std::vector<Cloud> bwd_sub(T);
  for (std::size_t t = 0; t < T; ++t) {
    Rng rf = make_stream(opt.seed, StreamTag::subsample_forward, t);
    fwd_sub[t] = subsample(run.forward.clouds[t], opt.subsample, rf);
    Rng rb = make_stream(opt.seed, StreamTag::subsample_backward, t);
    bwd_sub[t] = subsample(run.backward.clouds[t], opt.subsample, rb);
  }

  run.chosen.resize(T);
  run.tags.resize(T);
  run.backward_supported.resize(T);
  run.forward_supported.resize(T);
  run.backward_evaluations.assign(T, 0);
  run.forward_evaluations.assign(T, 0);
  run.fallback.assign(T, false);

  for (std::size_t t = 0; t < T; ++t) {
    std::optional<Cloud> p1;
    std::optional<Cloud> p2;
    EvaluationCounter c1;
    try {
      p1 = t == 0 ? smooth_initial_on_backward_support(bwd_sub[0], model)
                  : smooth_on_backward_support(fwd_sub[t - 1], bwd_sub[t], model, t, &c1);
    } catch (const IncompatibleSupportsError&) {
    }
    run.backward_evaluations[t] = c1.transitions;
    if (t + 1 == T) {
      p2 = run.forward.clouds[t];
    } else {
      EvaluationCounter c2;
      try {
        p2 = smooth_on_forward_support(fwd_sub[t], bwd_sub[t + 1], model, t, &c2);
      } catch (const IncompatibleSupportsError&) {
      }
      run.forward_evaluations[t] = c2.transitions;
    }
    run.backward_supported[t] = p1;
    run.forward_supported[t] = p2;
    if (t + 1 == T) {
      // Filtering and smoothing coincide at the last time.
      run.chosen[t] = *p2;
      run.tags[t] = Variant::forward_supported;
    } else if (!p1 && !p2) {
      // Subsamples this small can miss every pair of states one birth or death
      // apart. Use the filter on the side the selection rule would prefer.
      run.fallback[t] = true;
      if (run.forward.log_increments[t] >= run.backward.log_increments[t]) {
        run.chosen[t] = run.forward.clouds[t];
        run.tags[t] = Variant::forward_supported;
      } else {
        run.chosen[t] = run.backward.clouds[t];
        run.tags[t] = Variant::backward_supported;
      }
    } else {
      auto [cloud, tag] = select(std::move(p1), std::move(p2), run.forward.log_increments[t],
                                 run.backward.log_increments[t], t);
      run.chosen[t] = std::move(cloud);
      run.tags[t] = tag;
    }
  }
  return run;
}

}  // namespace dipsmc
