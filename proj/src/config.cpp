#include "dipsmc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "dipsmc/errors.hpp"

namespace dipsmc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* first = v.data();
  if (!v.empty() && v.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <class T>
Field real(T RunConfig::*section, double T::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) { (c.*section).*member = to_double(k, v); },
          [=](const RunConfig& c) { return fmt::format("{}", (c.*section).*member); }};
}

template <class T, class U>
Field integer(T RunConfig::*section, U T::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) {
            (c.*section).*member = static_cast<U>(to_uint(k, v));
          },
          [=](const RunConfig& c) { return fmt::format("{}", (c.*section).*member); }};
}

template <class U>
Field integer(U RunConfig::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) { c.*member = static_cast<U>(to_uint(k, v)); },
          [=](const RunConfig& c) { return fmt::format("{}", c.*member); }};
}

Field text(std::string GeometryConfig::*member) {
  return {[=](RunConfig& c, const std::string&, const std::string& v) { c.geometry.*member = v; },
          [=](const RunConfig& c) { return c.geometry.*member; }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["sphere_radius"] = real(&RunConfig::geometry, &GeometryConfig::sphere_radius);
    f["grid_spacing"] = real(&RunConfig::geometry, &GeometryConfig::grid_spacing);
    f["grid_margin"] = real(&RunConfig::geometry, &GeometryConfig::grid_margin);
    f["num_sensors"] = integer(&RunConfig::geometry, &GeometryConfig::num_sensors);
    f["sensor_radius"] = real(&RunConfig::geometry, &GeometryConfig::sensor_radius);
    f["sensor_cap_angle_deg"] = real(&RunConfig::geometry, &GeometryConfig::sensor_cap_angle_deg);
    f["sensor_file"] = text(&GeometryConfig::sensor_file);
    f["leadfield_file"] = text(&GeometryConfig::leadfield_file);

    f["n_max"] = integer(&RunConfig::model, &ModelParams::n_max);
    f["poisson_rate"] = real(&RunConfig::model, &ModelParams::poisson_rate);
    f["p_birth"] = real(&RunConfig::model, &ModelParams::p_birth);
    f["p_single_death"] = real(&RunConfig::model, &ModelParams::p_single_death);
    f["q_birth"] = real(&RunConfig::model, &ModelParams::q_birth);
    f["q_death"] = real(&RunConfig::model, &ModelParams::q_death);
    f["q_death_rule"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                           if (v == "constant") c.model.q_death_rule = DeathRule::constant;
                           else if (v == "per_dipole") c.model.q_death_rule = DeathRule::per_dipole;
                           else throw ConfigError(fmt::format("{}: expected constant|per_dipole, got '{}'", k, v));
                         },
                         [](const RunConfig& c) {
                           return std::string(c.model.q_death_rule == DeathRule::constant ? "constant" : "per_dipole");
                         }};
    f["rho"] = real(&RunConfig::model, &ModelParams::rho);
    f["moment_walk_factor"] = real(&RunConfig::model, &ModelParams::moment_walk_factor);
    f["q_min"] = real(&RunConfig::model, &ModelParams::q_min);
    f["q_max"] = real(&RunConfig::model, &ModelParams::q_max);

    f["group"] = integer(&RunConfig::simulation, &SimulationSpec::group);
    f["horizon"] = integer(&RunConfig::simulation, &SimulationSpec::horizon);
    f["noise_std"] = real(&RunConfig::simulation, &SimulationSpec::noise_std);
    f["walk_radius"] = real(&RunConfig::simulation, &SimulationSpec::walk_radius);
    f["bell_center"] = real(&RunConfig::simulation, &SimulationSpec::bell_center);
    f["bell_width"] = real(&RunConfig::simulation, &SimulationSpec::bell_width);
    f["strength"] = real(&RunConfig::simulation, &SimulationSpec::strength);

    f["particles"] = integer(&RunConfig::particles);
    f["subsample"] = integer(&RunConfig::subsample);
    f["resampling"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         if (v == "multinomial") c.resampling = ResamplingScheme::multinomial;
                         else if (v == "systematic") c.resampling = ResamplingScheme::systematic;
                         else throw ConfigError(fmt::format("{}: expected multinomial|systematic, got '{}'", k, v));
                       },
                       [](const RunConfig& c) {
                         return std::string(c.resampling == ResamplingScheme::multinomial ? "multinomial" : "systematic");
                       }};
    f["runs"] = integer(&RunConfig::runs);
    f["seed"] = integer(&RunConfig::seed);
    f["jobs"] = integer(&RunConfig::jobs);
    return f;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  const auto& g = geometry;
  if (!(g.sphere_radius > 0.0)) throw ConfigError("sphere_radius: must be positive");
  if (!(g.grid_spacing > 0.0)) {
    throw ConfigError("grid_spacing: must be positive");
  }
  if (!(g.grid_margin >= 0.0)) throw ConfigError("grid_margin: must be non-negative");
  if (g.sensor_file.empty()) {
    if (g.num_sensors < 1) throw ConfigError("num_sensors: must be positive");
    if (!(g.sensor_radius > g.sphere_radius)) throw ConfigError("sensor_radius: must exceed sphere_radius");
    if (!(g.sensor_cap_angle_deg > 0.0 && g.sensor_cap_angle_deg <= 180.0)) {
      throw ConfigError("sensor_cap_angle_deg: must lie in (0, 180]");
    }
  }
  if (particles < 2) throw ConfigError("particles: must be at least 2");
  if (subsample < 1) throw ConfigError("subsample: must be positive");
  if (runs < 1) throw ConfigError("runs: must be positive");
  if (jobs < 1) throw ConfigError("jobs: must be positive");
  simulation.validate();
  ModelParams m = model;
  m.noise_cov = isotropic_noise(1, simulation.noise_std);
  m.validate(1);
}

std::uint64_t RunConfig::simulation_seed(std::size_t run) const {
  return splitmix64(splitmix64(seed) ^ (0x5157ULL << 32 | run));
}

std::uint64_t RunConfig::inference_seed(std::size_t run) const {
  return splitmix64(splitmix64(seed) ^ (0x1f3fULL << 32 | run));
}

RunConfig parse_config(const std::string& input) {
  RunConfig c;
  std::istringstream in(input);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("line {}: expected key=value", lineno));
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", lineno, key));
    it->second.set(c, key, value);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += fmt::format("{}={}\n", key, field.get(config));
  return out;
}

Geometry build_geometry(const GeometryConfig& g) {
  Geometry geo;
  geo.grid = build_grid(g.sphere_radius, g.grid_spacing, g.grid_margin);
  geo.sensors = g.sensor_file.empty()
                    ? sensor_cap(g.num_sensors, g.sensor_radius, g.sensor_cap_angle_deg * std::numbers::pi / 180.0)
                    : load_sensors(g.sensor_file);
  geo.leadfield = g.leadfield_file.empty() ? sarvas_leadfield(geo.grid, geo.sensors)
                                           : load_leadfield(g.leadfield_file, geo.grid, geo.sensors.size());
  return geo;
}

ModelParams model_params(const RunConfig& config, std::size_t num_sensors) {
  ModelParams m = config.model;
  m.noise_cov = isotropic_noise(num_sensors, config.simulation.noise_std);
  return m;
}

}  // namespace dipsmc
