#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dipsmc/estimator.hpp"
#include "dipsmc/rng.hpp"
#include "helpers.hpp"

using namespace dipsmc;

namespace {

DipoleCloud weighted(std::vector<DipoleState> states, const std::vector<double>& w) {
  DipoleCloud c;
  c.particles = std::move(states);
  c.log_weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())).array().log();
  c.normalized = true;
  return c;
}

std::vector<double> random_weights(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (double& v : w) v = 0.05 + uniform01(rng);
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= s;
  return w;
}

DipoleState random_state(std::size_t n, std::size_t grid_size, Rng& rng) {
  DipoleState s;
  for (std::size_t i = 0; i < n; ++i) {
    s.dipoles.push_back(Dipole{rng() % grid_size, Vector3(uniform01(rng) - 0.5, uniform01(rng) - 0.5, uniform01(rng))});
  }
  return s;
}

SourceGrid line_grid(std::size_t n, double spacing) {
  std::vector<Vector3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(spacing * static_cast<double>(i), 0.0, 0.0);
  return SourceGrid(pts, spacing, 1.0);
}

// Exhaustive Delta_r over every injection, written independently of the library.
double brute_delta(const std::vector<Vector3>& truth, const std::vector<Vector3>& est) {
  const auto& small = est.size() <= truth.size() ? est : truth;
  const auto& big = est.size() <= truth.size() ? truth : est;
  std::vector<std::size_t> perm(big.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < small.size(); ++i) s += (small[i] - big[perm[i]]).norm();
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(est.size());
}

}  // namespace

TEST_CASE("cardinality mode") {
  SUBCASE("all empty") {
    CHECK(estimate_cardinality(uniform_cloud(std::vector<DipoleState>(4))) == 0);
  }
  SUBCASE("0.6 on one dipole, 0.4 on two") {
    Rng rng(1);
    const auto c = weighted({random_state(1, 5, rng), random_state(2, 5, rng), random_state(1, 5, rng)}, {0.3, 0.4, 0.3});
    CHECK(estimate_cardinality(c) == 1);
  }
  SUBCASE("ties go to the smaller count") {
    Rng rng(2);
    const auto c = weighted({random_state(3, 5, rng), random_state(2, 5, rng)}, {0.5, 0.5});
    CHECK(estimate_cardinality(c) == 2);
  }
  SUBCASE("matches a direct recount") {
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t n = 1 + rng() % 12;
      std::vector<DipoleState> states;
      for (std::size_t l = 0; l < n; ++l) states.push_back(random_state(rng() % 5, 8, rng));
      const auto c = weighted(states, random_weights(n, rng));
      std::vector<double> hist(5, 0.0);
      for (std::size_t l = 0; l < n; ++l) hist[states[l].size()] += c.weight(l);
      std::size_t best = 0;
      for (std::size_t k = 1; k < hist.size(); ++k) {
        if (hist[k] > hist[best]) best = k;
      }
      CHECK(estimate_cardinality(c) == best);
    }
  }
}

TEST_CASE("intensity map") {
  SUBCASE("empty particles give zeros") {
    const auto m = intensity_map(uniform_cloud(std::vector<DipoleState>(3)), 6);
    CHECK(m.size() == 6);
    CHECK(m.sum() == 0.0);
  }
  SUBCASE("single dipole is an indicator") {
    const DipoleState s{{Dipole{4, Vector3(1, 0, 0)}}};
    const auto m = intensity_map(uniform_cloud(std::vector<DipoleState>{s}), 6);
    for (Eigen::Index g = 0; g < 6; ++g) CHECK(m(g) == doctest::Approx(g == 4 ? 1.0 : 0.0));
  }
  SUBCASE("total is the mean cardinality") {
    Rng rng(4);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = 1 + rng() % 20;
      std::vector<DipoleState> states;
      for (std::size_t l = 0; l < n; ++l) states.push_back(random_state(rng() % 5, 10, rng));
      const auto w = random_weights(n, rng);
      const auto c = weighted(states, w);
      double mean_n = 0.0;
      for (std::size_t l = 0; l < n; ++l) mean_n += c.weight(l) * static_cast<double>(states[l].size());
      const auto m = intensity_map(c, 10);
      CHECK(std::abs(m.sum() - mean_n) < 1e-12);
      CHECK((m.array() >= 0.0).all());
    }
  }
}

TEST_CASE("peak picking") {
  const SourceGrid grid = line_grid(12, 0.01);
  SUBCASE("n_hat = 0") {
    CHECK(estimate_locations(Eigen::VectorXd::Ones(12), 0, grid, 0.02).empty());
  }
  SUBCASE("two separated spikes") {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(12);
    m(2) = 1.0;
    m(9) = 1.0;
    auto loc = estimate_locations(m, 2, grid, 0.02);
    std::sort(loc.begin(), loc.end());
    CHECK(loc == std::vector<std::size_t>{2, 9});
  }
  SUBCASE("neighbours of a peak are skipped") {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(12);
    m(5) = 1.0;
    m(6) = 0.9;
    m(8) = 0.5;
    CHECK(estimate_locations(m, 2, grid, 0.02) == std::vector<std::size_t>{5, 8});
    CHECK(estimate_locations(m, 5, grid, 0.02).size() == 2);  // support exhausted
  }
  SUBCASE("greedy is the best separated subset") {
    // Best means lexicographically largest list of values in decreasing
    // order, with a longer list beating its own prefix.
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
      Eigen::VectorXd m = Eigen::VectorXd::NullaryExpr(12, [&] { return uniform01(rng); });
      for (Eigen::Index g = 0; g < 12; ++g) {
        if (uniform01(rng) < 0.3) m(g) = 0.0;
      }
      const std::size_t n_hat = 1 + rng() % 5;
      const double sep = 0.01 * static_cast<double>(1 + rng() % 3);
      std::vector<double> best_vals;
      std::vector<std::size_t> best;
      for (unsigned mask = 1; mask < (1u << 12); ++mask) {
        std::vector<std::size_t> pts;
        for (std::size_t g = 0; g < 12; ++g) {
          if (mask >> g & 1u) pts.push_back(g);
        }
        if (pts.size() > n_hat) continue;
        bool ok = true;
        for (std::size_t a = 0; a < pts.size() && ok; ++a) {
          ok = m(static_cast<Eigen::Index>(pts[a])) > 0.0;
          for (std::size_t b = a + 1; b < pts.size() && ok; ++b) ok = (grid[pts[a]] - grid[pts[b]]).norm() >= sep;
        }
        if (!ok) continue;
        std::vector<double> vals;
        for (std::size_t g : pts) vals.push_back(m(static_cast<Eigen::Index>(g)));
        std::sort(vals.rbegin(), vals.rend());
        if (std::lexicographical_compare(best_vals.begin(), best_vals.end(), vals.begin(), vals.end())) {
          best_vals = vals;
          best = pts;
        }
      }
      auto got = estimate_locations(m, n_hat, grid, sep);
      std::sort(got.begin(), got.end());
      CHECK(got == best);
    }
  }
}

TEST_CASE("conditional mean moments") {
  const Vector3 q(1e-8, -2e-8, 3e-8);
  SUBCASE("single dipole") {
    const DipoleState s{{Dipole{3, q}}};
    CHECK((estimate_moment(uniform_cloud(std::vector<DipoleState>{s}), 3) - q).norm() == 0.0);
  }
  SUBCASE("opposite moments cancel") {
    const DipoleState a{{Dipole{3, q}}}, b{{Dipole{3, Vector3(-q)}}};
    CHECK(estimate_moment(uniform_cloud(std::vector<DipoleState>{a, b}), 3).norm() == 0.0);
  }
  SUBCASE("no mass gives zero") {
    const DipoleState a{{Dipole{3, q}}};
    CHECK(estimate_moment(uniform_cloud(std::vector<DipoleState>{a}), 1).norm() == 0.0);
  }
  SUBCASE("matches a direct weighted average") {
    Rng rng(6);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = 1 + rng() % 15;
      std::vector<DipoleState> states;
      for (std::size_t l = 0; l < n; ++l) states.push_back(random_state(rng() % 4, 4, rng));
      const auto w = random_weights(n, rng);
      const auto c = weighted(states, w);
      for (std::size_t g = 0; g < 4; ++g) {
        Vector3 num = Vector3::Zero();
        double den = 0.0;
        for (std::size_t l = 0; l < n; ++l) {
          for (const auto& d : states[l].dipoles) {
            if (d.grid_index != g) continue;
            num += c.weight(l) * d.moment;
            den += c.weight(l);
          }
        }
        const Vector3 expect = den > 0 ? Vector3(num / den) : Vector3::Zero();
        CHECK((estimate_moment(c, g) - expect).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("point estimate combines the pieces") {
  const SourceGrid grid = line_grid(10, 0.01);
  const DipoleState a{{Dipole{1, Vector3(1, 0, 0)}, Dipole{7, Vector3(0, 1, 0)}}};
  const DipoleState b{{Dipole{1, Vector3(3, 0, 0)}}};
  const auto c = weighted({a, a, b}, {0.3, 0.3, 0.4});
  const auto est = point_estimate(c, grid);
  CHECK(est.n_hat == 2);
  CHECK(est.locations == std::vector<std::size_t>{1, 7});
  CHECK((est.moments[0] - Vector3(1.8, 0, 0)).norm() < 1e-12);
  CHECK((est.moments[1] - Vector3(0, 1, 0)).norm() < 1e-12);
  CHECK(point_estimate(uniform_cloud(std::vector<DipoleState>(2)), grid).n_hat == 0);
}

TEST_CASE("localisation error") {
  const Vector3 a(0.01, 0, 0), b(0, 0.02, 0), c(0, 0, -0.03);
  SUBCASE("same locations") {
    CHECK(*localization_error({a, b}, {b, a}) == 0.0);
  }
  SUBCASE("single pair is the distance") {
    CHECK(*localization_error({a}, {b}) == doctest::Approx((a - b).norm()).epsilon(1e-15));
  }
  SUBCASE("two sources, one estimate: nearer source") {
    const Vector3 e(0.011, 0.001, 0);
    CHECK(*localization_error({a, b}, {e}) == doctest::Approx(std::min((e - a).norm(), (e - b).norm())));
    CHECK(*localization_error({a, b}, {e}) == doctest::Approx(brute_delta({a, b}, {e})).epsilon(1e-12));
  }
  SUBCASE("one source, two estimates: divide by two") {
    CHECK(*localization_error({a}, {a, c}) == 0.0);
    CHECK(*localization_error({a}, {b, c}) == doctest::Approx(std::min((a - b).norm(), (a - c).norm()) / 2));
  }
  SUBCASE("no estimate") {
    CHECK_FALSE(localization_error({a}, {}).has_value());
  }
  SUBCASE("random sets against brute force") {
    Rng rng(7);
    const double radius = 0.09;
    for (int rep = 0; rep < 300; ++rep) {
      std::vector<Vector3> t(1 + rng() % 4), e(1 + rng() % 4);
      for (auto* v : {&t, &e}) {
        for (auto& p : *v) p = radius * testing::random_unit(rng) * std::cbrt(uniform01(rng));
      }
      const double d = *localization_error(t, e);
      CHECK(std::abs(d - brute_delta(t, e)) < 1e-12);
      CHECK(d >= 0.0);
      CHECK(d <= 2 * radius);
      if (t.size() == e.size()) CHECK(std::abs(d - *localization_error(e, t)) < 1e-15);
    }
  }
  SUBCASE("grid version uses grid coordinates") {
    const SourceGrid grid = line_grid(5, 0.01);
    const DipoleState truth{{Dipole{0, Vector3(1, 0, 0)}}};
    PointEstimate est;
    est.n_hat = 1;
    est.locations = {3};
    est.moments = {Vector3::Zero()};
    CHECK(*localization_error(truth, est, grid) == doctest::Approx(0.03));
  }
}

TEST_CASE("error curves") {
  using E = std::optional<double>;
  SUBCASE("identical runs") {
    const std::vector<std::vector<E>> runs(4, std::vector<E>{0.01, 0.02});
    const auto c = error_curve(runs);
    REQUIRE(c.size() == 2);
    CHECK(c[0].count == 4);
    CHECK(c[1].mean == doctest::Approx(0.02));
    CHECK(c[0].bar == 0.0);
    CHECK(c[1].bar == 0.0);
  }
  SUBCASE("no reconstruction") {
    const std::vector<std::vector<E>> runs{{std::nullopt, 0.01}, {std::nullopt, std::nullopt}};
    const auto c = error_curve(runs);
    CHECK(c[0].count == 0);
    CHECK(std::isnan(c[0].mean));
    CHECK(c[1].count == 1);
    CHECK(c[1].bar == 0.0);
  }
  SUBCASE("three runs by hand") {
    // t=0: 1, 2, 4 -> mean 7/3, population variance 14/9, bar sqrt(14/9)/3.
    // t=1: 3 and 5 (one missing) -> mean 4, std 1, bar 1/2.
    const std::vector<std::vector<E>> runs{{1.0, 3.0}, {2.0, std::nullopt}, {4.0, 5.0}};
    const auto c = error_curve(runs);
    CHECK(c[0].mean == doctest::Approx(7.0 / 3.0));
    CHECK(c[0].bar == doctest::Approx(std::sqrt(14.0 / 9.0) / 3.0));
    CHECK(c[0].count == 3);
    CHECK(c[1].mean == doctest::Approx(4.0));
    CHECK(c[1].bar == doctest::Approx(0.5));
    CHECK(c[1].count == 2);
  }
  SUBCASE("misaligned inputs") {
    const SourceGrid grid = line_grid(3, 0.01);
    CHECK_THROWS_AS(error_curve(std::vector<std::vector<PointEstimate>>(2), std::vector<std::vector<DipoleState>>(1), grid),
                    std::invalid_argument);
  }
}
