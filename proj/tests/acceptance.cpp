// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "dipsmc/checks.hpp"
#include "dipsmc/estimator.hpp"
#include "dipsmc/pipeline.hpp"
#include "helpers.hpp"
#include "quantized.hpp"

using namespace dipsmc;
namespace fs = std::filesystem;
using checks::CheckResult;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

RunConfig batch_config(int group) {
  RunConfig c = parse_config(fmt::format("group = {}\nruns = 20\nparticles = 1000\nsubsample = 100\nseed = 1\n", group));
  c.jobs = default_jobs();
  return c;
}

// simulate + infer + curves for one group into dir/{sim,res,cur}.
void run_pipeline(const RunConfig& c, const fs::path& dir) {
  cmd_simulate(c, dir / "sim");
  cmd_infer(c, dir / "sim", dir / "res");
  cmd_curves(dir / "res", dir / "cur");
}

// 1-based first time with at least one estimated dipole; T + 1 if never.
std::size_t first_reconstruction(const std::vector<PointEstimate>& est) {
  for (std::size_t t = 0; t < est.size(); ++t) {
    if (est[t].n_hat >= 1) return t + 1;
  }
  return est.size() + 1;
}

CheckResult oracle_exact() {
  auto r = checks::hmm_exact_equivalence(2024);
  r.name = "1. oracle equivalence, exact";
  return r;
}

CheckResult oracle_monte_carlo() {
  auto r = checks::linear_gaussian_equivalence(2024);
  r.name = "2. oracle equivalence, Monte Carlo";
  return r;
}

CheckResult early_reconstruction(const fs::path& work) {
  CheckResult res{"3. smoothing reconstructs earlier (group 5)", false, {}};
  const auto start = Clock::now();
  const RunConfig c = batch_config(5);
  run_pipeline(c, work / "group5");
  int early_f = 0, early_s = 0;
  double first_f = 0.0, first_s = 0.0;
  for (std::size_t r = 0; r < c.runs; ++r) {
    const auto f = read_estimates_csv(work / "group5" / "res" / fmt::format("run_{:03d}_filter.csv", r));
    const auto s = read_estimates_csv(work / "group5" / "res" / fmt::format("run_{:03d}_smoother.csv", r));
    const std::size_t ff = first_reconstruction(f), fs_ = first_reconstruction(s);
    early_f += ff <= 3;
    early_s += fs_ <= 3;
    first_f += static_cast<double>(ff);
    first_s += static_cast<double>(fs_);
  }
  first_f /= static_cast<double>(c.runs);
  first_s /= static_cast<double>(c.runs);
  const double secs = seconds_since(start);
  res.passed = early_s > early_f && first_f - first_s >= 2.0 && secs < 600.0;
  res.detail = fmt::format(
      "runs reconstructing at t<=3: smoother {} vs filter {}; mean first time smoother {:.2f} vs filter {:.2f} "
      "(earlier by {:.2f}, need 2); {:.1f} s",
      early_s, early_f, first_s, first_f, first_f - first_s, secs);
  return res;
}

CheckResult first_half_error(const fs::path& work) {
  CheckResult res{"4. smoothing error lower in the first half (group 1)", false, {}};
  run_pipeline(batch_config(1), work / "group1");
  std::ifstream in(work / "group1" / "cur" / "curves_group_1.csv");
  std::string line;
  std::getline(in, line);
  double sum_f = 0.0, sum_s = 0.0;
  int n_f = 0, n_s = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      f.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (std::stoi(f[0]) > 15) break;
    if (!f[1].empty()) sum_f += std::stod(f[1]), ++n_f;
    if (!f[4].empty()) sum_s += std::stod(f[4]), ++n_s;
  }
  const double mf = n_f ? sum_f / n_f : NAN, ms = n_s ? sum_s / n_s : NAN;
  res.passed = n_s > 0 && n_f > 0 && ms <= mf;
  res.detail = fmt::format("mean error over t=1..15: smoother {:.2f} mm ({} times) vs filter {:.2f} mm ({} times)",
                           1e3 * ms, n_s, 1e3 * mf, n_f);
  return res;
}

CheckResult kernel_normalisation() {
  CheckResult res{"5. transition kernel normalisation", false, {}};
  const testing::QuantizedSpace space;
  const std::size_t n_max = 3;
  const ModelParams params;
  const BirthDeathRates p = params.dynamics();
  const BirthDeathRates eta = params.proposal();
  Rng rng(505);
  std::uniform_int_distribution<std::size_t> item(0, space.num_items() - 1);
  double worst_mc = 0.0, worst_exact = 0.0;
  bool support_ok = true;
  for (int s = 0; s < 10; ++s) {
    testing::QState prev;
    const std::size_t n = static_cast<std::size_t>(s) % (n_max + 1);
    for (std::size_t i = 0; i < n; ++i) prev.push_back(space.item(item(rng)));
    const auto bp = p.at(n, n_max), be = eta.at(n, n_max);
    // Draw from the proposal, weight by the exact density ratio.
    double sum = 0.0;
    const int draws = 100000;
    for (int d = 0; d < draws; ++d) {
      const auto next = sample_transition(rng, prev, space, be);
      const double log_eta = transition_logpdf(next, prev, space, be);
      if (!std::isfinite(log_eta)) support_ok = false;
      sum += std::exp(transition_logpdf(next, prev, space, bp) - log_eta);
    }
    worst_mc = std::max(worst_mc, std::abs(sum / draws - 1.0));
    worst_exact = std::max({worst_exact, std::abs(testing::exhaustive_mass(space, prev, p, n_max) - 1.0),
                            std::abs(testing::exhaustive_mass(space, prev, eta, n_max) - 1.0)});
  }
  res.passed = support_ok && worst_mc <= 0.01 && worst_exact <= 1e-6;
  res.detail = fmt::format("10 states x 1e5 draws: max |mass - 1| = {:.4f} (tol 0.01); exhaustive max |mass - 1| = {:.2e} "
                           "(tol 1e-6){}",
                           worst_mc, worst_exact, support_ok ? "" : "; proposal density vanished on a draw");
  return res;
}

double brute_delta(const std::vector<Vector3>& truth, const std::vector<Vector3>& est) {
  const auto& small = est.size() <= truth.size() ? est : truth;
  const auto& big = est.size() <= truth.size() ? truth : est;
  std::vector<std::size_t> perm(big.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < small.size(); ++i) s += (small[i] - big[perm[i]]).norm();
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(est.size());
}

CheckResult metric_properties() {
  CheckResult res{"6. localisation error properties", false, {}};
  // A coarse grid makes coincident locations common.
  const SourceGrid grid = build_grid(0.09, 0.03, 0.01);
  Rng rng(606);
  std::uniform_int_distribution<std::size_t> point(0, grid.size() - 1), count(1, 4);
  int negative = 0, zero_mismatch = 0, equal_sets = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::size_t> ti(count(rng)), ei;
    for (auto& g : ti) g = point(rng);
    if (i % 4 == 0) {
      ei = ti;  // same multiset, shuffled
      std::shuffle(ei.begin(), ei.end(), rng);
    } else {
      ei.resize(count(rng));
      for (auto& g : ei) g = point(rng);
    }
    std::vector<Vector3> t, e;
    for (auto g : ti) t.push_back(grid[g]);
    for (auto g : ei) e.push_back(grid[g]);
    const double d = *localization_error(t, e);
    negative += d < 0.0;
    worst = std::max(worst, std::abs(d - brute_delta(t, e)));
    if (t.size() == e.size()) {
      auto a = ti, b = ei;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      equal_sets += a == b;
      zero_mismatch += (d == 0.0) != (a == b);
    }
  }
  res.passed = negative == 0 && zero_mismatch == 0 && worst <= 1e-12;
  res.detail = fmt::format("1000 pairs: {} negative, {} zero/equality mismatches ({} equal multisets), "
                           "max |fast - permutations| = {:.2e} (tol 1e-12)",
                           negative, zero_mismatch, equal_sets, worst);
  return res;
}

CheckResult determinism_and_cost(const fs::path& work) {
  CheckResult res{"7. determinism and cost", false, {}};
  // Second full pipeline on group 1; the first ran for criterion 4.
  run_pipeline(batch_config(1), work / "group1_again");
  std::size_t files = 0, differing = 0;
  for (const char* sub : {"sim", "res", "cur"}) {
    for (const auto& entry : fs::directory_iterator(work / "group1" / sub)) {
      ++files;
      const fs::path other = work / "group1_again" / sub / entry.path().filename();
      if (!fs::exists(other) || testing::slurp(entry.path()) != testing::slurp(other)) ++differing;
    }
  }

  // One run at 1000 particles, subsample 100, T = 30 on a ~800-point grid.
  RunConfig c = batch_config(1);
  c.geometry.grid_spacing = 0.0138;
  const Geometry geo = build_geometry(c.geometry);
  SimulationSpec spec = c.simulation;
  spec.seed = c.simulation_seed(0);
  const auto truth = generate(spec, geo.grid, geo.leadfield);
  const DipoleModel model(model_params(c, geo.sensors.size()), geo.grid, geo.leadfield);
  const auto start = Clock::now();
  const auto run = run_double_smoother<DipoleModel>(truth.noisy_data, model, smoother_options(c, 0));
  const double secs = seconds_since(start);
  const std::size_t m2 = c.subsample * c.subsample;
  std::size_t wrong = 0, fwd_short = 0;
  for (std::size_t t = 1; t + 1 < run.horizon(); ++t) {
    wrong += run.backward_evaluations[t] != m2;
    fwd_short += run.forward_evaluations[t] != m2;
  }
  res.passed = files > 0 && differing == 0 && wrong == 0 && secs < 60.0;
  res.detail = fmt::format(
      "{} files compared, {} differ; interior times with backward-supported count != m^2: {} "
      "(forward-supported count != m^2 at {} times); single run on {} grid points: {:.1f} s",
      files, differing, wrong, fwd_short, geo.grid.size(), secs);
  return res;
}

}  // namespace

int main() {
  testing::TempDir work("acceptance");
  const std::vector<std::function<CheckResult()>> criteria{
      oracle_exact,
      oracle_monte_carlo,
      [&] { return early_reconstruction(work.path()); },
      [&] { return first_half_error(work.path()); },
      kernel_normalisation,
      metric_properties,
      [&] { return determinism_and_cost(work.path()); },
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    CheckResult r;
    try {
      r = criteria[i]();
    } catch (const std::exception& e) {
      r.name = fmt::format("{}. criterion", i + 1);
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    failed += !r.passed;
    std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
