#include "dipsmc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "csv.hpp"
#include "dipsmc/errors.hpp"

namespace dipsmc {

namespace fs = std::filesystem;

namespace {

std::string run_name(std::size_t run, const char* suffix) { return fmt::format("run_{:03d}_{}.csv", run, suffix); }

const char* variant_name(Variant v) { return v == Variant::forward_supported ? "forward" : "backward"; }

// Runs fn(run) for every run on up to `jobs` threads. Errors are rethrown
// for the lowest failing run id, so the reported failure does not depend on
// scheduling.
template <class Fn>
void for_each_run(std::size_t runs, std::size_t jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < runs; r = next++) {
      try {
        fn(r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, runs));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  for (std::size_t r = 0; r < runs; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const DegenerateError& e) {
      throw DegenerateError::prefixed(fmt::format("run {}: ", r), e);
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

std::string field(double v) { return std::isfinite(v) ? fmt::format("{}", v) : std::string(); }

}  // namespace

SmootherOptions smoother_options(const RunConfig& config, std::size_t run) {
  SmootherOptions opt;
  opt.particles = config.particles;
  opt.subsample = config.subsample;
  opt.seed = config.inference_seed(run);
  opt.scheme = config.resampling;
  return opt;
}

RunEstimates infer_run(const DipoleModel& model, std::span<const SensorVector> data,
                       const SmootherOptions& options) {
  const auto sm = run_double_smoother(data, model, options);
  RunEstimates out;
  for (std::size_t t = 0; t < sm.horizon(); ++t) {
    out.filter.push_back(point_estimate(sm.forward.clouds[t], model.grid()));
    out.smoother.push_back(point_estimate(sm.chosen[t], model.grid()));
    out.tags.push_back(sm.tags[t]);
    out.log_lf.push_back(sm.forward.log_increments[t]);
    out.log_lb.push_back(sm.backward.log_increments[t]);
    out.ess_chosen.push_back(effective_sample_size(sm.chosen[t]));
    out.ess_forward.push_back(sm.forward.ess[t]);
    out.ess_backward.push_back(sm.backward.ess[t]);
    out.fallback.push_back(sm.fallback[t]);
  }
  return out;
}

void write_truth_csv(const fs::path& path, const SimulationTruth& truth) {
  std::size_t width = 0;
  for (const auto& s : truth.states) width = std::max(width, s.size());
  csv::Writer w(path);
  std::string header = "t,N";
  for (std::size_t i = 1; i <= width; ++i) header += fmt::format(",idx_{0},qx_{0},qy_{0},qz_{0}", i);
  w.line(header);
  for (std::size_t t = 0; t < truth.states.size(); ++t) {
    const auto& s = truth.states[t];
    std::string row = fmt::format("{},{}", t + 1, s.size());
    for (std::size_t i = 0; i < width; ++i) {
      if (i < s.size()) {
        const auto& d = s.dipoles[i];
        row += fmt::format(",{},{},{},{}", d.grid_index, d.moment.x(), d.moment.y(), d.moment.z());
      } else {
        row += ",,,,";
      }
    }
    w.line(row);
  }
  w.close();
}

std::vector<DipoleState> read_truth_csv(const fs::path& path) {
  const auto table = csv::read(path);
  const std::size_t n_col = table.column("N");
  std::vector<DipoleState> states;
  for (const auto& row : table.rows) {
    const std::size_t n = csv::to_size(row[n_col], path);
    if (n_col + 1 + 4 * n > row.size()) throw IoError(fmt::format("{}: truncated truth row", path.string()));
    DipoleState s;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = n_col + 1 + 4 * i;
      Dipole d;
      d.grid_index = csv::to_size(row[base], path);
      d.moment = Vector3(csv::to_double(row[base + 1], path), csv::to_double(row[base + 2], path),
                         csv::to_double(row[base + 3], path));
      s.dipoles.push_back(d);
    }
    states.push_back(std::move(s));
  }
  return states;
}

void write_data_csv(const fs::path& path, std::span<const SensorVector> data) {
  csv::Writer w(path);
  const auto S = data.empty() ? 0 : data.front().size();
  std::string header = "t";
  for (Eigen::Index s = 0; s < S; ++s) header += fmt::format(",s_{}", s);
  w.line(header);
  for (std::size_t t = 0; t < data.size(); ++t) {
    w.line(fmt::format("{},{}", t + 1, fmt::join(data[t].begin(), data[t].end(), ",")));
  }
  w.close();
}

std::vector<SensorVector> read_data_csv(const fs::path& path) {
  const auto table = csv::read(path);
  if (table.header.empty() || table.header.front() != "t") {
    throw IoError(fmt::format("{}: first column must be t", path.string()));
  }
  std::vector<SensorVector> data;
  for (const auto& row : table.rows) {
    SensorVector v(static_cast<Eigen::Index>(row.size() - 1));
    for (std::size_t i = 1; i < row.size(); ++i) v(static_cast<Eigen::Index>(i - 1)) = csv::to_double(row[i], path);
    data.push_back(std::move(v));
  }
  return data;
}

void write_estimates_csv(const fs::path& path, std::span<const PointEstimate> estimates, const SourceGrid& grid) {
  csv::Writer w(path);
  w.line("t,n_hat,k,grid_index,x,y,z,qx,qy,qz");
  for (std::size_t t = 0; t < estimates.size(); ++t) {
    const auto& e = estimates[t];
    if (e.locations.empty()) {
      w.line(fmt::format("{},0,,,,,,,,", t + 1));
      continue;
    }
    for (std::size_t k = 0; k < e.locations.size(); ++k) {
      const Vector3& p = grid[e.locations[k]];
      const Vector3& q = e.moments[k];
      w.line(fmt::format("{},{},{},{},{},{},{},{},{},{}", t + 1, e.n_hat, k + 1, e.locations[k], p.x(), p.y(),
                         p.z(), q.x(), q.y(), q.z()));
    }
  }
  w.close();
}

std::vector<PointEstimate> read_estimates_csv(const fs::path& path) {
  const auto table = csv::read(path);
  const std::size_t ct = table.column("t");
  const std::size_t cn = table.column("n_hat");
  const std::size_t cg = table.column("grid_index");
  const std::size_t cq = table.column("qx");
  std::vector<PointEstimate> out;
  for (const auto& row : table.rows) {
    const std::size_t t = csv::to_size(row[ct], path);
    if (t < 1) throw IoError(fmt::format("{}: time index must start at 1", path.string()));
    if (out.size() < t) out.resize(t);
    PointEstimate& e = out[t - 1];
    e.n_hat = csv::to_size(row[cn], path);
    if (e.n_hat == 0) continue;
    e.locations.push_back(csv::to_size(row[cg], path));
    e.moments.emplace_back(csv::to_double(row[cq], path), csv::to_double(row[cq + 1], path),
                           csv::to_double(row[cq + 2], path));
  }
  return out;
}

std::vector<Variant> read_variant_tags(const fs::path& path) {
  const auto table = csv::read(path);
  const std::size_t cv = table.column("variant");
  std::vector<Variant> tags;
  for (const auto& row : table.rows) {
    if (row[cv] == "forward") tags.push_back(Variant::forward_supported);
    else if (row[cv] == "backward") tags.push_back(Variant::backward_supported);
    else throw IoError(fmt::format("{}: unknown variant '{}'", path.string(), row[cv]));
  }
  return tags;
}

void write_curve_csv(const fs::path& path, std::span<const CurveRow> rows) {
  csv::Writer w(path);
  w.line("t,mean_filter,bar_filter,count_filter,mean_smoother,bar_smoother,count_smoother,variant_tag_mode");
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto& r = rows[t];
    w.line(fmt::format("{},{},{},{},{},{},{},{}", t + 1, field(r.filter.mean), field(r.filter.bar), r.filter.count,
                       field(r.smoother.mean), field(r.smoother.bar), r.smoother.count, r.variant_mode));
  }
  w.close();
}

std::vector<double> cmd_simulate(const RunConfig& config, const fs::path& out) {
  config.validate();
  ensure_dir(out);
  const Geometry geo = build_geometry(config.geometry);

  std::vector<double> snrs(config.runs);
  std::vector<std::uint64_t> seeds(config.runs);
  for_each_run(config.runs, config.jobs, [&](std::size_t r) {
    SimulationSpec spec = config.simulation;
    spec.seed = config.simulation_seed(r);
    const SimulationTruth truth = generate(spec, geo.grid, geo.leadfield);
    write_truth_csv(out / run_name(r, "truth"), truth);
    write_data_csv(out / run_name(r, "data"), truth.noisy_data);
    snrs[r] = snr(truth);
    seeds[r] = spec.seed;
  });

  write_text(out / "config.txt", to_text(config));
  csv::Writer w(out / "manifest.csv");
  w.line("run,group,seed,snr,truth_file,data_file");
  for (std::size_t r = 0; r < config.runs; ++r) {
    w.line(fmt::format("{},{},{},{},{},{}", r, config.simulation.group, seeds[r], snrs[r], run_name(r, "truth"),
                       run_name(r, "data")));
  }
  w.close();
  return snrs;
}

void cmd_infer(const RunConfig& config, const fs::path& data_dir, const fs::path& out) {
  config.validate();
  const auto manifest = csv::read(data_dir / "manifest.csv");
  const std::size_t c_run = manifest.column("run");
  const std::size_t c_group = manifest.column("group");
  const std::size_t c_truth = manifest.column("truth_file");
  const std::size_t c_data = manifest.column("data_file");

  const Geometry geo = build_geometry(config.geometry);
  const DipoleModel model(model_params(config, geo.sensors.size()), geo.grid, geo.leadfield);

  // Validate every input before any compute.
  std::vector<std::vector<SensorVector>> data(manifest.rows.size());
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    data[i] = read_data_csv(data_dir / manifest.rows[i][c_data]);
    if (data[i].size() < 2) throw IoError(fmt::format("run {}: need at least two time points", i));
    for (const auto& d : data[i]) {
      if (static_cast<std::size_t>(d.size()) != geo.sensors.size()) {
        throw IoError(fmt::format("{}: {} sensor columns, model has {} sensors", manifest.rows[i][c_data],
                                  d.size(), geo.sensors.size()));
      }
    }
  }
  ensure_dir(out);

  std::vector<std::size_t> run_ids(manifest.rows.size());
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) run_ids[i] = csv::to_size(manifest.rows[i][c_run], data_dir);

  for_each_run(manifest.rows.size(), config.jobs, [&](std::size_t i) {
    const std::size_t r = run_ids[i];
    const RunEstimates est = infer_run(model, data[i], smoother_options(config, r));
    write_estimates_csv(out / run_name(r, "filter"), est.filter, model.grid());
    write_estimates_csv(out / run_name(r, "smoother"), est.smoother, model.grid());
    csv::Writer w(out / run_name(r, "diagnostics"));
    w.line("t,variant,ess_chosen,ess_forward,ess_backward,log_lf,log_lb,fallback");
    for (std::size_t t = 0; t < est.tags.size(); ++t) {
      w.line(fmt::format("{},{},{},{},{},{},{},{}", t + 1, variant_name(est.tags[t]), est.ess_chosen[t],
                         est.ess_forward[t], est.ess_backward[t], est.log_lf[t], est.log_lb[t],
                         est.fallback[t] ? 1 : 0));
    }
    w.close();
  });

  write_text(out / "config.txt", to_text(config));
  csv::Writer w(out / "results_manifest.csv");
  w.line("run,group,seed,truth_file,filter_file,smoother_file,diagnostics_file");
  const fs::path data_rel = fs::relative(fs::absolute(data_dir), fs::absolute(out));
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const std::size_t r = run_ids[i];
    w.line(fmt::format("{},{},{},{},{},{},{}", r, manifest.rows[i][c_group], config.inference_seed(r),
                       (data_rel / manifest.rows[i][c_truth]).generic_string(), run_name(r, "filter"),
                       run_name(r, "smoother"), run_name(r, "diagnostics")));
  }
  w.close();
}

std::vector<int> cmd_curves(const fs::path& results_dir, const fs::path& out) {
  const RunConfig config = load_config(results_dir / "config.txt");
  const SourceGrid grid = build_grid(config.geometry.sphere_radius, config.geometry.grid_spacing,
                                     config.geometry.grid_margin);
  const auto manifest = csv::read(results_dir / "results_manifest.csv");
  if (manifest.rows.empty()) throw IoError("no completed runs in " + results_dir.string());
  const std::size_t c_group = manifest.column("group");
  const std::size_t c_truth = manifest.column("truth_file");
  const std::size_t c_filter = manifest.column("filter_file");
  const std::size_t c_smoother = manifest.column("smoother_file");
  const std::size_t c_diag = manifest.column("diagnostics_file");

  struct GroupRuns {
    std::vector<std::vector<PointEstimate>> filter, smoother;
    std::vector<std::vector<DipoleState>> truth;
    std::vector<std::vector<Variant>> tags;
  };
  std::map<int, GroupRuns> groups;
  for (const auto& row : manifest.rows) {
    const fs::path truth_path = results_dir / row[c_truth];
    if (!fs::exists(truth_path)) throw IoError(fmt::format("missing truth file {}", truth_path.string()));
    auto& g = groups[static_cast<int>(csv::to_size(row[c_group], results_dir))];
    g.truth.push_back(read_truth_csv(truth_path));
    g.filter.push_back(read_estimates_csv(results_dir / row[c_filter]));
    g.smoother.push_back(read_estimates_csv(results_dir / row[c_smoother]));
    g.tags.push_back(read_variant_tags(results_dir / row[c_diag]));
    const std::size_t T = g.truth.back().size();
    if (g.filter.back().size() != T || g.smoother.back().size() != T || g.tags.back().size() != T) {
      throw IoError(fmt::format("{}: result horizon does not match truth", row[c_filter]));
    }
  }

  ensure_dir(out);
  std::vector<int> written;
  for (const auto& [group, g] : groups) {
    const auto fc = error_curve(g.filter, g.truth, grid);
    const auto sc = error_curve(g.smoother, g.truth, grid);
    std::vector<CurveRow> rows(fc.size());
    for (std::size_t t = 0; t < fc.size(); ++t) {
      std::size_t fwd = 0;
      std::size_t bwd = 0;
      for (const auto& tags : g.tags) (tags[t] == Variant::forward_supported ? fwd : bwd)++;
      rows[t] = {fc[t], sc[t], fwd >= bwd ? "forward" : "backward"};
    }
    write_curve_csv(out / fmt::format("curves_group_{}.csv", group), rows);
    written.push_back(group);
  }
  return written;
}

}  // namespace dipsmc
