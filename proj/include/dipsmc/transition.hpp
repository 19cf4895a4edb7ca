#pragma once

// Birth / death / survive transition kernel over unordered collections of
// "items" (dipoles). The per-item pieces come from a Space policy:
//
//   typename Space::Item
//   Item   sample_birth(Rng&) const;
//   double log_birth(const Item&) const;
//   Item   sample_move(const Item& from, Rng&) const;
//   double log_move(const Item& from, const Item& to) const;
//
// States are ordered tuples carrying a symmetrised density: the density of a
// tuple averages the labelled kernel over all assignments of next items to
// previous items, so it is invariant under permutations and sums to one over
// ordered tuples.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dipsmc/rng.hpp"

namespace dipsmc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(std::span<const double> terms) {
  double hi = kNegInf;
  for (double v : terms) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

struct BranchProbabilities {
  double birth = 0.0;
  double death = 0.0;
  double survive = 1.0;
};

enum class DeathRule {
  per_dipole,  // 1 - (1 - rate)^N
  constant,    // rate whenever N > 0
};

/// Birth and death rates of one kernel. Boundary mass (death at N = 0, birth
/// at N = n_max) is folded into the survive branch.
struct BirthDeathRates {
  double birth = 0.0;
  double death = 0.0;
  DeathRule rule = DeathRule::per_dipole;

  BranchProbabilities at(std::size_t n, std::size_t n_max) const {
    BranchProbabilities p;
    p.birth = n < n_max ? birth : 0.0;
    if (n == 0) {
      p.death = 0.0;
    } else if (rule == DeathRule::per_dipole) {
      p.death = 1.0 - std::pow(1.0 - death, static_cast<double>(n));
    } else {
      p.death = death;
    }
    p.survive = 1.0 - p.birth - p.death;
    return p;
  }

  bool admissible(std::size_t n_max) const {
    if (!(birth > 0.0 && birth < 1.0 && death > 0.0 && death < 1.0)) return false;
    for (std::size_t n = 0; n <= n_max; ++n) {
      const auto p = at(n, n_max);
      if (!(p.survive > 0.0)) return false;
    }
    return true;
  }
};

namespace detail {

// Enumerates injective assignments of every next item to a distinct previous
// item, or (at most once) to the newborn slot.
inline void collect_matchings(const Eigen::MatrixXd& pair_log, std::span<const double> birth_log,
                              Eigen::Index col, std::vector<bool>& used, bool birth_used,
                              double partial, std::vector<double>& terms) {
  if (partial == kNegInf) return;
  if (col == pair_log.cols()) {
    terms.push_back(partial);
    return;
  }
  for (Eigen::Index row = 0; row < pair_log.rows(); ++row) {
    if (used[static_cast<std::size_t>(row)]) continue;
    used[static_cast<std::size_t>(row)] = true;
    collect_matchings(pair_log, birth_log, col + 1, used, birth_used, partial + pair_log(row, col),
                      terms);
    used[static_cast<std::size_t>(row)] = false;
  }
  if (!birth_log.empty() && !birth_used) {
    collect_matchings(pair_log, birth_log, col + 1, used, true,
                      partial + birth_log[static_cast<std::size_t>(col)], terms);
  }
}

}  // namespace detail

/// log of the sum over matchings of the products of `pair_log(prev, next)`;
/// when `birth_log` is non-empty exactly one next item may be unmatched and
/// contributes `birth_log[next]` instead.
inline double log_matching_sum(const Eigen::MatrixXd& pair_log, std::span<const double> birth_log) {
  std::vector<bool> used(static_cast<std::size_t>(pair_log.rows()), false);
  std::vector<double> terms;
  detail::collect_matchings(pair_log, birth_log, 0, used, false, 0.0, terms);
  return log_sum_exp(terms);
}

template <class Space>
std::vector<typename Space::Item> sample_transition(Rng& rng,
                                                    const std::vector<typename Space::Item>& prev,
                                                    const Space& space,
                                                    const BranchProbabilities& branch) {
  using Item = typename Space::Item;
  const double u = uniform01(rng);
  std::vector<Item> next;
  next.reserve(prev.size() + 1);
  if (u < branch.birth) {
    for (const Item& it : prev) next.push_back(space.sample_move(it, rng));
    next.push_back(space.sample_birth(rng));
  } else if (u < branch.birth + branch.death) {
    std::uniform_int_distribution<std::size_t> pick(0, prev.size() - 1);
    const std::size_t dead = pick(rng);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (i != dead) next.push_back(space.sample_move(prev[i], rng));
    }
  } else {
    for (const Item& it : prev) next.push_back(space.sample_move(it, rng));
  }
  return next;
}

/// log density of `next` given `prev` for the mixture kernel with the given
/// branch probabilities (already evaluated at prev's cardinality).
template <class Space>
double transition_logpdf(const std::vector<typename Space::Item>& next,
                         const std::vector<typename Space::Item>& prev, const Space& space,
                         const BranchProbabilities& branch) {
  const auto n_prev = static_cast<Eigen::Index>(prev.size());
  const auto n_next = static_cast<Eigen::Index>(next.size());

  double branch_prob = 0.0;
  double log_perm_count = 0.0;
  bool birth = false;
  if (n_next == n_prev) {
    branch_prob = branch.survive;
    log_perm_count = std::lgamma(static_cast<double>(n_prev) + 1.0);
  } else if (n_next == n_prev + 1) {
    branch_prob = branch.birth;
    log_perm_count = std::lgamma(static_cast<double>(n_next) + 1.0);
    birth = true;
  } else if (n_next + 1 == n_prev) {
    branch_prob = branch.death;
    log_perm_count = std::lgamma(static_cast<double>(n_prev) + 1.0);
  } else {
    return kNegInf;
  }
  if (!(branch_prob > 0.0)) return kNegInf;

  Eigen::MatrixXd pair_log(n_prev, n_next);
  for (Eigen::Index i = 0; i < n_prev; ++i) {
    for (Eigen::Index j = 0; j < n_next; ++j) {
      pair_log(i, j) = space.log_move(prev[static_cast<std::size_t>(i)], next[static_cast<std::size_t>(j)]);
    }
  }
  std::vector<double> birth_log;
  if (birth) {
    birth_log.reserve(next.size());
    for (const auto& it : next) birth_log.push_back(space.log_birth(it));
  }
  return std::log(branch_prob) - log_perm_count + log_matching_sum(pair_log, birth_log);
}

}  // namespace dipsmc
