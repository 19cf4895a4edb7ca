#include "dipsmc/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "dipsmc/oracle.hpp"
#include "dipsmc/smoother.hpp"

namespace dipsmc::checks {

namespace {

template <class State>
double cloud_mean(const ParticleCloud<State>& c) {
  double m = 0.0;
  for (std::size_t l = 0; l < c.size(); ++l) m += c.weight(l) * static_cast<double>(c.particles[l]);
  return m;
}

ParticleCloud<std::size_t> exhaustive_cloud(const Eigen::VectorXd& p) {
  ParticleCloud<std::size_t> c;
  for (Eigen::Index k = 0; k < p.size(); ++k) c.particles.push_back(static_cast<std::size_t>(k));
  c.log_weights = p.array().log().matrix();
  c.normalized = true;
  return c;
}

Eigen::VectorXd cloud_marginal(const ParticleCloud<std::size_t>& c, std::size_t K) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  for (std::size_t l = 0; l < c.size(); ++l) m(static_cast<Eigen::Index>(c.particles[l])) += c.weight(l);
  return m;
}

}  // namespace

CheckResult hmm_exact_equivalence(std::uint64_t seed, int models) {
  CheckResult res{"hmm exact equivalence", true, {}};
  double worst_path = 0.0;
  double worst_smc = 0.0;
  Rng rng(seed);
  for (int i = 0; i < models; ++i) {
    const std::size_t K = 1 + rng() % 5;
    const std::size_t S = 2 + rng() % 3;
    const std::size_t T = 2 + rng() % 5;
    const auto hmm = oracle::random_hmm(K, S, rng);
    const auto data = oracle::simulate(hmm, T, rng);
    // A non-trivial auxiliary sequence exercises the gamma terms.
    std::vector<Eigen::VectorXd> gammas;
    for (std::size_t t = 0; t < T; ++t) {
      Eigen::VectorXd g = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(K),
                                                       [&] { return 0.1 + uniform01(rng); });
      gammas.push_back(g / g.sum());
    }
    const auto exact = oracle::hmm_exact(hmm, data, gammas);
    const auto brute = oracle::hmm_path_sum(hmm, data);
    const oracle::DiscreteHmmSmc smc_model(hmm, gammas);
    for (std::size_t t = 0; t < T; ++t) {
      worst_path = std::max(worst_path, (exact.smoothing[t] - brute[t]).cwiseAbs().maxCoeff());
      const auto bwd = exhaustive_cloud(exact.tilted[t]);
      const auto p1 = t == 0 ? smooth_initial_on_backward_support(bwd, smc_model)
                             : smooth_on_backward_support(exhaustive_cloud(exact.filtering[t - 1]), bwd,
                                                          smc_model, t);
      worst_smc = std::max(worst_smc, (cloud_marginal(p1, K) - brute[t]).cwiseAbs().maxCoeff());
      const auto fwd = exhaustive_cloud(exact.filtering[t]);
      const auto p2 = t + 1 == T ? fwd
                                 : smooth_on_forward_support(fwd, exhaustive_cloud(exact.tilted[t + 1]),
                                                             smc_model, t);
      worst_smc = std::max(worst_smc, (cloud_marginal(p2, K) - brute[t]).cwiseAbs().maxCoeff());
    }
  }
  res.passed = worst_path <= 1e-12 && worst_smc <= 1e-10;
  res.detail = fmt::format("{} models: max |exact - paths| = {:.3g} (tol 1e-12), max |smc - paths| = {:.3g} (tol 1e-10)",
                           models, worst_path, worst_smc);
  return res;
}

CheckResult linear_gaussian_equivalence(std::uint64_t seed, int trials, int required, std::size_t particles,
                                        std::size_t subsample) {
  CheckResult res{"linear-Gaussian Monte Carlo equivalence", false, {}};
  const auto start = std::chrono::steady_clock::now();
  const oracle::ScalarLGModel lg;
  const oracle::LinearGaussianSmc model(lg);
  constexpr std::size_t T = 30;
  int passed = 0;
  double worst = 0.0;  // largest error in units of the tolerance
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = make_stream(seed, StreamTag::simulation, static_cast<std::uint64_t>(trial));
    const auto y = oracle::simulate(lg, T, rng);
    const auto kf = oracle::kalman_filter(lg, y);
    const auto rts = oracle::rts_smoother(lg, kf);
    SmootherOptions opt;
    opt.particles = particles;
    opt.subsample = subsample;
    opt.seed = splitmix64(seed ^ static_cast<std::uint64_t>(trial));
    const auto run = run_double_smoother<oracle::LinearGaussianSmc>(y, model, opt);

    double trial_worst = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double tol_f = 5.0 * std::sqrt(kf.filtered.variance[t] / static_cast<double>(particles));
      trial_worst = std::max(trial_worst, std::abs(cloud_mean(run.forward.clouds[t]) - kf.filtered.mean[t]) / tol_f);
      const double tol_s = 5.0 * std::sqrt(rts.variance[t] / static_cast<double>(subsample));
      for (const auto* cand : {&run.backward_supported[t], &run.forward_supported[t]}) {
        const double err = cand->has_value() ? std::abs(cloud_mean(**cand) - rts.mean[t]) / tol_s : INFINITY;
        trial_worst = std::max(trial_worst, err);
      }
    }
    worst = std::max(worst, trial_worst);
    if (trial_worst <= 1.0) ++passed;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.passed = passed >= required;
  res.detail = fmt::format("{}/{} trials within tolerance (need {}), worst error {:.2f} x tol, {:.2f} s", passed,
                           trials, required, worst, seconds);
  return res;
}

}  // namespace dipsmc::checks
