#include "dipsmc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "dipsmc/errors.hpp"

namespace dipsmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Vector3 uniform_direction(Rng& rng) {
  std::normal_distribution<double> n01;
  Vector3 v;
  do {
    v = Vector3(n01(rng), n01(rng), n01(rng));
  } while (v.squaredNorm() == 0.0);
  return v.normalized();
}

}  // namespace

void ModelParams::validate(std::size_t num_sensors) const {
  if (!(poisson_rate >= 0.0)) throw ConfigError("poisson_rate must be >= 0");
  if (!(p_birth > 0.0 && p_birth < 1.0)) throw ConfigError("p_birth must lie in (0, 1)");
  if (!(p_single_death > 0.0 && p_single_death < 1.0)) {
    throw ConfigError("p_single_death must lie in (0, 1)");
  }
  if (!dynamics().admissible(n_max)) {
    throw ConfigError("p_birth + P_death(N) must stay below 1 for every N <= n_max");
  }
  if (!proposal().admissible(n_max)) {
    throw ConfigError("q_birth + Q_death(N) must stay below 1 for every N <= n_max");
  }
  if (!(rho > 0.0)) throw ConfigError("rho must be positive");
  if (!(moment_walk_factor > 0.0)) throw ConfigError("moment_walk_factor must be positive");
  if (!(q_min > 0.0 && q_min < q_max)) throw ConfigError("strength bounds need 0 < q_min < q_max");
  if (noise_cov.rows() != static_cast<Eigen::Index>(num_sensors) || noise_cov.cols() != noise_cov.rows()) {
    throw ConfigError(fmt::format("noise covariance must be {0} x {0}", num_sensors));
  }
  if ((noise_cov - noise_cov.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * noise_cov.cwiseAbs().maxCoeff()) {
    throw ConfigError("noise covariance must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(noise_cov);
  if (llt.info() != Eigen::Success) throw ConfigError("noise covariance must be positive definite");
}

Eigen::MatrixXd isotropic_noise(std::size_t num_sensors, double sigma) {
  const auto n = static_cast<Eigen::Index>(num_sensors);
  return sigma * sigma * Eigen::MatrixXd::Identity(n, n);
}

LocationKernel::LocationKernel(const SourceGrid& grid, double rho) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  log_prob_.resize(n, n);
  cdf_.resize(n, n);
  const double inv = 1.0 / (2.0 * rho * rho);
  for (Eigen::Index from = 0; from < n; ++from) {
    const Vector3& p = grid[static_cast<std::size_t>(from)];
    Eigen::VectorXd row(n);
    for (Eigen::Index to = 0; to < n; ++to) {
      row(to) = -(grid[static_cast<std::size_t>(to)] - p).squaredNorm() * inv;
    }
    // The diagonal term is exp(0) = 1, so the normaliser never underflows.
    const double log_norm = std::log(row.array().exp().sum());
    log_prob_.row(from) = (row.array() - log_norm).matrix().transpose();
    double acc = 0.0;
    for (Eigen::Index to = 0; to < n; ++to) {
      acc += std::exp(log_prob_(from, to));
      cdf_(to, from) = acc;
    }
    cdf_(n - 1, from) = 1.0;
  }
}

double LocationKernel::prob(std::size_t from, std::size_t to) const {
  return std::exp(log_prob(from, to));
}

std::size_t LocationKernel::sample(std::size_t from, Rng& rng) const {
  const double u = uniform01(rng);
  const double* first = cdf_.col(static_cast<Eigen::Index>(from)).data();
  const double* last = first + cdf_.rows();
  const double* it = std::upper_bound(first, last, u);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - first, cdf_.rows() - 1));
}

GaussianNoise::GaussianNoise(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ConfigError("noise covariance must be positive definite");
  chol_ = llt.matrixL();
  const double log_det = 2.0 * chol_.diagonal().array().log().sum();
  log_norm_ = -0.5 * (static_cast<double>(cov.rows()) * kLog2Pi + log_det);
}

double GaussianNoise::log_density(const SensorVector& datum, const SensorVector& mean) const {
  const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(datum - mean);
  return log_norm_ - 0.5 * z.squaredNorm();
}

DipoleSpace::DipoleSpace(const LocationKernel* kernel, std::size_t grid_size, double q_min,
                         double q_max, double walk_factor)
    : kernel_(kernel),
      grid_size_(grid_size),
      q_min_(q_min),
      q_max_(q_max),
      walk_factor_(walk_factor),
      log_strength_range_(std::log(std::log(q_max / q_min))) {}

Dipole DipoleSpace::sample_birth(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> loc(0, grid_size_ - 1);
  Dipole d;
  d.grid_index = loc(rng);
  const Vector3 dir = uniform_direction(rng);
  const double strength = q_min_ * std::exp(uniform01(rng) * std::log(q_max_ / q_min_));
  d.moment = strength * dir;
  return d;
}

double DipoleSpace::log_birth(const Dipole& d) const {
  const double s = d.moment.norm();
  if (!(s >= q_min_ && s <= q_max_) || d.grid_index >= grid_size_) return kNegInf;
  // uniform location, uniform direction, log-uniform strength; moment density
  // w.r.t. Lebesgue measure on R^3 picks up the 1/|q|^2 Jacobian.
  return -std::log(static_cast<double>(grid_size_)) - std::log(4.0 * std::numbers::pi) -
         log_strength_range_ - 3.0 * std::log(s);
}

double DipoleSpace::moment_step_std(const Vector3& q) const {
  return std::max(walk_factor_ * q.norm(), 1e-3 * q_min_);
}

Dipole DipoleSpace::sample_move(const Dipole& from, Rng& rng) const {
  Dipole d;
  d.grid_index = kernel_->sample(from.grid_index, rng);
  std::normal_distribution<double> n01;
  const double sd = moment_step_std(from.moment);
  const double x = n01(rng);
  const double y = n01(rng);
  const double z = n01(rng);
  d.moment = from.moment + sd * Vector3(x, y, z);
  return d;
}

double DipoleSpace::log_move(const Dipole& from, const Dipole& to) const {
  const double sd = moment_step_std(from.moment);
  const double var = sd * sd;
  return kernel_->log_prob(from.grid_index, to.grid_index) - 1.5 * (kLog2Pi + std::log(var)) -
         0.5 * (to.moment - from.moment).squaredNorm() / var;
}

std::vector<double> cardinality_log_prior(double rate, std::size_t n_max) {
  std::vector<double> logp(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    const double dn = static_cast<double>(n);
    if (rate == 0.0) {
      logp[n] = n == 0 ? 0.0 : kNegInf;
    } else {
      logp[n] = dn * std::log(rate) - std::lgamma(dn + 1.0);  // e^-rate cancels
    }
  }
  const double z = log_sum_exp(logp);
  for (double& v : logp) v -= z;
  return logp;
}

namespace {

DipoleState sample_prior_impl(Rng& rng, const std::vector<double>& card_log_prior,
                              const DipoleSpace& space) {
  std::vector<double> probs(card_log_prior.size());
  std::transform(card_log_prior.begin(), card_log_prior.end(), probs.begin(),
                 [](double v) { return std::exp(v); });
  // Inverse-cdf draw keeps the RNG consumption fixed at one uniform.
  const double u = uniform01(rng);
  std::size_t n = 0;
  double acc = probs[0];
  while (u >= acc && n + 1 < probs.size()) acc += probs[++n];
  DipoleState s;
  for (std::size_t i = 0; i < n; ++i) s.dipoles.push_back(space.sample_birth(rng));
  return s;
}

double prior_logpdf_impl(const DipoleState& state, const std::vector<double>& card_log_prior,
                         const DipoleSpace& space) {
  if (state.size() >= card_log_prior.size()) return kNegInf;
  double lp = card_log_prior[state.size()];
  for (const Dipole& d : state.dipoles) lp += space.log_birth(d);
  return lp;
}

}  // namespace

DipoleState sample_prior(Rng& rng, const ModelParams& params, const SourceGrid& grid) {
  const DipoleSpace space(nullptr, grid.size(), params.q_min, params.q_max, params.moment_walk_factor);
  return sample_prior_impl(rng, cardinality_log_prior(params.poisson_rate, params.n_max), space);
}

double prior_logpdf(const DipoleState& state, const ModelParams& params, const SourceGrid& grid) {
  const DipoleSpace space(nullptr, grid.size(), params.q_min, params.q_max, params.moment_walk_factor);
  return prior_logpdf_impl(state, cardinality_log_prior(params.poisson_rate, params.n_max), space);
}

DipoleState sample_transition(Rng& rng, const DipoleState& state, const ModelParams& params,
                              const LocationKernel& kernel, const BirthDeathRates& rates) {
  const DipoleSpace space(&kernel, kernel.size(), params.q_min, params.q_max, params.moment_walk_factor);
  return {sample_transition(rng, state.dipoles, space, rates.at(state.size(), params.n_max))};
}

double transition_logpdf(const DipoleState& next, const DipoleState& prev, const ModelParams& params,
                         const LocationKernel& kernel, const BirthDeathRates& rates) {
  if (next.size() > params.n_max) return kNegInf;
  const DipoleSpace space(&kernel, kernel.size(), params.q_min, params.q_max, params.moment_walk_factor);
  return transition_logpdf(next.dipoles, prev.dipoles, space, rates.at(prev.size(), params.n_max));
}

double likelihood_logpdf(const SensorVector& datum, const DipoleState& state, const Leadfield& lf,
                         const GaussianNoise& noise) {
  if (static_cast<std::size_t>(datum.size()) != lf.num_sensors()) {
    throw GeometryError(fmt::format("datum has {} entries, leadfield has {} sensors", datum.size(),
                                    lf.num_sensors()));
  }
  return noise.log_density(datum, predict_data(state, lf));
}

DipoleModel::DipoleModel(ModelParams params, SourceGrid grid, Leadfield lf)
    : params_(checked(std::move(params), lf.num_sensors())),
      grid_(std::move(grid)),
      lf_(std::move(lf)),
      kernel_(grid_, params_.rho),
      noise_(params_.noise_cov),
      space_(&kernel_, grid_.size(), params_.q_min, params_.q_max, params_.moment_walk_factor),
      card_log_prior_(cardinality_log_prior(params_.poisson_rate, params_.n_max)) {
  if (lf_.num_points() != grid_.size()) {
    throw GeometryError(fmt::format("leadfield has {} points, grid has {}", lf_.num_points(), grid_.size()));
  }
}

ModelParams DipoleModel::checked(ModelParams params, std::size_t num_sensors) {
  params.validate(num_sensors);
  return params;
}

DipoleState DipoleModel::sample_initial(Rng& rng) const {
  return sample_prior_impl(rng, card_log_prior_, space_);
}

double DipoleModel::log_initial(const State& x) const {
  return prior_logpdf_impl(x, card_log_prior_, space_);
}

DipoleState DipoleModel::sample_gamma(std::size_t, Rng& rng) const { return sample_initial(rng); }

double DipoleModel::log_gamma(std::size_t, const State& x) const { return log_initial(x); }

DipoleState DipoleModel::propose_forward(const State& prev, Rng& rng) const {
  return {sample_transition(rng, prev.dipoles, space_, params_.proposal().at(prev.size(), params_.n_max))};
}

double DipoleModel::log_forward_correction(const State& next, const State& prev) const {
  // Target and proposal share the per-dipole factors, so the ratio reduces to
  // the ratio of the branch probabilities.
  const auto p = params_.dynamics().at(prev.size(), params_.n_max);
  const auto q = params_.proposal().at(prev.size(), params_.n_max);
  if (next.size() == prev.size()) return std::log(p.survive) - std::log(q.survive);
  if (next.size() == prev.size() + 1) return std::log(p.birth) - std::log(q.birth);
  if (next.size() + 1 == prev.size()) return std::log(p.death) - std::log(q.death);
  return kNegInf;
}

DipoleState DipoleModel::propose_backward(const State& next, Rng& rng) const {
  return {sample_transition(rng, next.dipoles, space_, params_.proposal().at(next.size(), params_.n_max))};
}

double DipoleModel::log_backward_proposal(const State& prev, const State& next) const {
  if (prev.size() > params_.n_max) return kNegInf;
  return transition_logpdf(prev.dipoles, next.dipoles, space_,
                           params_.proposal().at(next.size(), params_.n_max));
}

double DipoleModel::log_transition(const State& next, const State& prev) const {
  if (next.size() > params_.n_max) return kNegInf;
  return transition_logpdf(next.dipoles, prev.dipoles, space_,
                           params_.dynamics().at(prev.size(), params_.n_max));
}

double DipoleModel::log_likelihood(const Observation& datum, const State& x) const {
  return noise_.log_density(datum, predict_data(x, lf_));
}

}  // namespace dipsmc
