#include "dipsmc/oracle.hpp"

#include <stdexcept>

#include "dipsmc/errors.hpp"

namespace dipsmc::oracle {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

std::size_t sample_discrete(const Eigen::Ref<const Eigen::VectorXd>& p, Rng& rng) {
  const double u = uniform01(rng) * p.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<std::size_t>(i);
  }
  return static_cast<std::size_t>(p.size() - 1);
}

}  // namespace

void ScalarLGModel::validate() const {
  if (!(transition_std > 0.0 && observation_std > 0.0 && prior_std > 0.0)) {
    throw ConfigError("linear-Gaussian model standard deviations must be positive");
  }
}

KalmanResult kalman_filter_multi(const ScalarLGModel& model, std::span<const std::vector<double>> data) {
  model.validate();
  KalmanResult out;
  const double a = model.transition;
  const double q2 = model.transition_std * model.transition_std;
  const double c = model.observation;
  const double r2 = model.observation_std * model.observation_std;
  double m = model.prior_mean;
  double p = model.prior_std * model.prior_std;
  for (std::size_t t = 0; t < data.size(); ++t) {
    if (t > 0) {
      m = a * m;
      p = a * a * p + q2;
    }
    out.predicted.mean.push_back(m);
    out.predicted.variance.push_back(p);
    double inc = 0.0;
    for (double y : data[t]) {
      const double s = c * c * p + r2;
      inc += log_normal(y, c * m, s);
      const double k = p * c / s;
      m += k * (y - c * m);
      p = (1.0 - k * c) * p;
    }
    out.filtered.mean.push_back(m);
    out.filtered.variance.push_back(p);
    out.log_increments.push_back(inc);
  }
  return out;
}

KalmanResult kalman_filter(const ScalarLGModel& model, std::span<const double> data) {
  std::vector<std::vector<double>> wrapped;
  wrapped.reserve(data.size());
  for (double y : data) wrapped.push_back({y});
  return kalman_filter_multi(model, wrapped);
}

GaussianMarginals rts_smoother(const ScalarLGModel& model, const KalmanResult& kf) {
  const std::size_t T = kf.filtered.mean.size();
  GaussianMarginals s = kf.filtered;
  const double a = model.transition;
  for (std::size_t t = T - 1; t-- > 0;) {
    const double gain = kf.filtered.variance[t] * a / kf.predicted.variance[t + 1];
    s.mean[t] = kf.filtered.mean[t] + gain * (s.mean[t + 1] - kf.predicted.mean[t + 1]);
    s.variance[t] = kf.filtered.variance[t] +
                    gain * gain * (s.variance[t + 1] - kf.predicted.variance[t + 1]);
  }
  return s;
}

std::vector<double> simulate(const ScalarLGModel& model, std::size_t horizon, Rng& rng) {
  std::normal_distribution<double> n01;
  std::vector<double> y;
  double x = model.prior_mean + model.prior_std * n01(rng);
  for (std::size_t t = 0; t < horizon; ++t) {
    if (t > 0) x = model.transition * x + model.transition_std * n01(rng);
    y.push_back(model.observation * x + model.observation_std * n01(rng));
  }
  return y;
}

void DiscreteHMM::validate() const {
  const auto K = initial.size();
  if (K < 1 || transition.rows() != K || transition.cols() != K || emission.rows() != K) {
    throw ConfigError("inconsistent HMM dimensions");
  }
  if (std::abs(initial.sum() - 1.0) > 1e-12 || (initial.array() < 0.0).any()) {
    throw ConfigError("HMM initial distribution must sum to one");
  }
  for (Eigen::Index i = 0; i < K; ++i) {
    if (std::abs(transition.row(i).sum() - 1.0) > 1e-12 || (transition.row(i).array() < 0.0).any()) {
      throw ConfigError("HMM transition rows must sum to one");
    }
    if (std::abs(emission.row(i).sum() - 1.0) > 1e-12 || (emission.row(i).array() < 0.0).any()) {
      throw ConfigError("HMM emission rows must sum to one");
    }
  }
}

DiscreteHMM random_hmm(std::size_t states, std::size_t symbols, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const auto K = static_cast<Eigen::Index>(states);
  const auto S = static_cast<Eigen::Index>(symbols);
  DiscreteHMM m;
  m.transition = Eigen::MatrixXd::NullaryExpr(K, K, [&] { return u(rng); });
  m.emission = Eigen::MatrixXd::NullaryExpr(K, S, [&] { return u(rng); });
  m.initial = Eigen::VectorXd::NullaryExpr(K, [&] { return u(rng); });
  for (Eigen::Index i = 0; i < K; ++i) {
    m.transition.row(i) /= m.transition.row(i).sum();
    m.emission.row(i) /= m.emission.row(i).sum();
  }
  m.initial /= m.initial.sum();
  return m;
}

std::vector<std::size_t> simulate(const DiscreteHMM& model, std::size_t horizon, Rng& rng) {
  std::vector<std::size_t> y;
  std::size_t x = sample_discrete(model.initial, rng);
  for (std::size_t t = 0; t < horizon; ++t) {
    if (t > 0) x = sample_discrete(model.transition.row(static_cast<Eigen::Index>(x)).transpose(), rng);
    y.push_back(sample_discrete(model.emission.row(static_cast<Eigen::Index>(x)).transpose(), rng));
  }
  return y;
}

HmmExact hmm_exact(const DiscreteHMM& model, std::span<const std::size_t> data,
                   std::span<const Eigen::VectorXd> gammas) {
  model.validate();
  const std::size_t T = data.size();
  const Eigen::MatrixXd& A = model.transition;
  auto emit = [&](std::size_t t) -> Eigen::VectorXd {
    return model.emission.col(static_cast<Eigen::Index>(data[t]));
  };
  auto gamma = [&](std::size_t t) -> const Eigen::VectorXd& {
    return gammas.empty() ? model.initial : gammas[t];
  };

  HmmExact out;
  out.predictive.resize(T);
  out.filtering.resize(T);
  out.backward_info.resize(T);
  out.tilted.resize(T);
  out.tilted_future.resize(T);
  out.smoothing.resize(T);
  out.smoothing_forward.resize(T);
  out.log_increments.resize(T);

  for (std::size_t t = 0; t < T; ++t) {
    out.predictive[t] = t == 0 ? model.initial : Eigen::VectorXd(A.transpose() * out.filtering[t - 1]);
    const Eigen::VectorXd joint = out.predictive[t].cwiseProduct(emit(t));
    out.log_increments[t] = std::log(joint.sum());
    out.filtering[t] = joint / joint.sum();
  }

  // beta_t(j) = p(d_{t:T} | j_t = j)
  for (std::size_t t = T; t-- > 0;) {
    Eigen::VectorXd future = Eigen::VectorXd::Ones(A.rows());
    if (t + 1 < T) future = A * out.backward_info[t + 1];
    out.backward_info[t] = emit(t).cwiseProduct(future);

    const Eigen::VectorXd tilt = out.backward_info[t].cwiseProduct(gamma(t));
    out.tilted[t] = tilt / tilt.sum();
    const Eigen::VectorXd tilt_future = future.cwiseProduct(gamma(t));
    out.tilted_future[t] = tilt_future / tilt_future.sum();
  }

  for (std::size_t t = 0; t < T; ++t) {
    Eigen::VectorXd s = out.predictive[t].cwiseProduct(out.tilted[t]).cwiseQuotient(gamma(t));
    out.smoothing[t] = s / s.sum();

    // Forward-supported route: filtering times the gamma-tilted message built
    // from the tilted quantity at t+1.
    Eigen::VectorXd f = out.filtering[t];
    if (t + 1 < T) {
      const Eigen::VectorXd msg = A * out.tilted[t + 1].cwiseQuotient(gamma(t + 1));
      f = f.cwiseProduct(msg);
    }
    out.smoothing_forward[t] = f / f.sum();
  }
  return out;
}

std::vector<Eigen::VectorXd> hmm_path_sum(const DiscreteHMM& model, std::span<const std::size_t> data) {
  const std::size_t T = data.size();
  const std::size_t K = model.num_states();
  std::vector<Eigen::VectorXd> marg(T, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K)));
  std::vector<std::size_t> path(T, 0);
  double total = 0.0;
  for (;;) {
    double p = model.initial(static_cast<Eigen::Index>(path[0]));
    for (std::size_t t = 0; t < T; ++t) {
      const auto x = static_cast<Eigen::Index>(path[t]);
      if (t > 0) p *= model.transition(static_cast<Eigen::Index>(path[t - 1]), x);
      p *= model.emission(x, static_cast<Eigen::Index>(data[t]));
    }
    total += p;
    for (std::size_t t = 0; t < T; ++t) marg[t](static_cast<Eigen::Index>(path[t])) += p;
    std::size_t i = 0;
    while (i < T && ++path[i] == K) path[i++] = 0;
    if (i == T) break;
  }
  for (auto& m : marg) m /= total;
  return marg;
}

LinearGaussianSmc::LinearGaussianSmc(ScalarLGModel model) : m_(model) {
  m_.validate();
  if (m_.transition == 0.0) throw ConfigError("backward proposal needs a non-zero transition coefficient");
}

double LinearGaussianSmc::sample_initial(Rng& rng) const {
  return m_.prior_mean + m_.prior_std * std::normal_distribution<double>()(rng);
}

double LinearGaussianSmc::log_initial(double x) const {
  return log_normal(x, m_.prior_mean, m_.prior_std * m_.prior_std);
}

double LinearGaussianSmc::sample_gamma(std::size_t, Rng& rng) const { return sample_initial(rng); }

double LinearGaussianSmc::log_gamma(std::size_t, double x) const { return log_initial(x); }

double LinearGaussianSmc::propose_forward(double prev, Rng& rng) const {
  return m_.transition * prev + m_.transition_std * std::normal_distribution<double>()(rng);
}

double LinearGaussianSmc::propose_backward(double next, Rng& rng) const {
  return next / m_.transition +
         m_.transition_std / std::abs(m_.transition) * std::normal_distribution<double>()(rng);
}

double LinearGaussianSmc::log_backward_proposal(double prev, double next) const {
  const double sd = m_.transition_std / std::abs(m_.transition);
  return log_normal(prev, next / m_.transition, sd * sd);
}

double LinearGaussianSmc::log_transition(double next, double prev) const {
  return log_normal(next, m_.transition * prev, m_.transition_std * m_.transition_std);
}

double LinearGaussianSmc::log_likelihood(double y, double x) const {
  return log_normal(y, m_.observation * x, m_.observation_std * m_.observation_std);
}

DiscreteHmmSmc::DiscreteHmmSmc(DiscreteHMM model, std::vector<Eigen::VectorXd> gammas)
    : m_(std::move(model)), gammas_(std::move(gammas)) {
  m_.validate();
  reverse_ = m_.transition.transpose();
  for (Eigen::Index j = 0; j < reverse_.rows(); ++j) {
    const double s = reverse_.row(j).sum();
    if (!(s > 0.0)) throw ConfigError("every HMM state must be reachable for the backward proposal");
    reverse_.row(j) /= s;
  }
}

const Eigen::VectorXd& DiscreteHmmSmc::gamma(std::size_t t) const {
  return gammas_.empty() ? m_.initial : gammas_.at(t);
}

std::size_t DiscreteHmmSmc::sample_initial(Rng& rng) const { return sample_discrete(m_.initial, rng); }

double DiscreteHmmSmc::log_initial(std::size_t x) const {
  return std::log(m_.initial(static_cast<Eigen::Index>(x)));
}

std::size_t DiscreteHmmSmc::sample_gamma(std::size_t t, Rng& rng) const {
  return sample_discrete(gamma(t), rng);
}

double DiscreteHmmSmc::log_gamma(std::size_t t, std::size_t x) const {
  return std::log(gamma(t)(static_cast<Eigen::Index>(x)));
}

std::size_t DiscreteHmmSmc::propose_forward(std::size_t prev, Rng& rng) const {
  return sample_discrete(m_.transition.row(static_cast<Eigen::Index>(prev)).transpose(), rng);
}

std::size_t DiscreteHmmSmc::propose_backward(std::size_t next, Rng& rng) const {
  return sample_discrete(reverse_.row(static_cast<Eigen::Index>(next)).transpose(), rng);
}

double DiscreteHmmSmc::log_backward_proposal(std::size_t prev, std::size_t next) const {
  return std::log(reverse_(static_cast<Eigen::Index>(next), static_cast<Eigen::Index>(prev)));
}

double DiscreteHmmSmc::log_transition(std::size_t next, std::size_t prev) const {
  return std::log(m_.transition(static_cast<Eigen::Index>(prev), static_cast<Eigen::Index>(next)));
}

double DiscreteHmmSmc::log_likelihood(std::size_t y, std::size_t x) const {
  return std::log(m_.emission(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)));
}

}  // namespace dipsmc::oracle
