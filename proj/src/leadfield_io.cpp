#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/os.h>

#include "dipsmc/errors.hpp"
#include "dipsmc/geometry.hpp"

namespace dipsmc {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view tok, double& value) {
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), value);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  return in;
}

}  // namespace

Leadfield load_leadfield(const std::filesystem::path& path, const SourceGrid& grid,
                         std::size_t num_sensors) {
  std::ifstream in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(fmt::format("{}: missing header", path.string()));
  const auto header = split_ws(line);
  std::size_t points = 0;
  std::size_t sensors = 0;
  if (header.size() != 2 ||
      std::from_chars(header[0].data(), header[0].data() + header[0].size(), points).ec !=
          std::errc() ||
      std::from_chars(header[1].data(), header[1].data() + header[1].size(), sensors).ec !=
          std::errc()) {
    throw IoError(fmt::format("{}: header must be 'num_points num_sensors'", path.string()));
  }
  if (points != grid.size() || sensors != num_sensors) {
    throw IoError(fmt::format("{}: dimension mismatch, file has {} points x {} sensors, expected {} x {}",
                              path.string(), points, sensors, grid.size(), num_sensors));
  }

  Leadfield lf(points, sensors);
  for (std::size_t row = 0; row < 3 * points; ++row) {
    if (!std::getline(in, line)) {
      throw IoError(fmt::format("{}: expected {} data lines, found {}", path.string(), 3 * points, row));
    }
    const auto tokens = split_ws(line);
    if (tokens.size() != sensors) {
      throw IoError(fmt::format("{}: line {} has {} values, expected {}", path.string(), row + 2,
                                tokens.size(), sensors));
    }
    const std::size_t g = row / 3;
    const int c = static_cast<int>(row % 3);
    for (std::size_t s = 0; s < sensors; ++s) {
      double v = 0.0;
      if (!parse_double(tokens[s], v)) {
        throw IoError(fmt::format("{}: unparsable value '{}' at point {}, column {}, sensor {}",
                                  path.string(), tokens[s], g, c, s));
      }
      if (!std::isfinite(v)) {
        throw IoError(fmt::format("{}: non-finite entry at point {}, column {}, sensor {}",
                                  path.string(), g, c, s));
      }
      lf.block(g)(static_cast<Eigen::Index>(s), c) = v;
    }
  }
  while (std::getline(in, line)) {
    if (!split_ws(line).empty()) throw IoError(fmt::format("{}: trailing data", path.string()));
  }
  return lf;
}

void save_leadfield(const std::filesystem::path& path, const Leadfield& lf) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << fmt::format("{} {}\n", lf.num_points(), lf.num_sensors());
  for (std::size_t g = 0; g < lf.num_points(); ++g) {
    const auto block = lf.block(g);
    for (int c = 0; c < 3; ++c) {
      // Shortest round-trip representation keeps save/load bit-exact.
      out << fmt::format("{}\n", fmt::join(block.col(c).begin(), block.col(c).end(), " "));
    }
  }
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

SensorArray load_sensors(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  SensorArray sensors;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 6) {
      throw IoError(fmt::format("{}: line {} must have 6 values", path.string(), lineno));
    }
    double v[6];
    for (int i = 0; i < 6; ++i) {
      if (!parse_double(tokens[static_cast<std::size_t>(i)], v[i]) || !std::isfinite(v[i])) {
        throw IoError(fmt::format("{}: bad value on line {}", path.string(), lineno));
      }
    }
    const Vector3 o(v[3], v[4], v[5]);
    if (std::abs(o.norm() - 1.0) > 1e-12) {
      throw IoError(fmt::format("{}: orientation on line {} is not a unit vector", path.string(), lineno));
    }
    sensors.positions.emplace_back(v[0], v[1], v[2]);
    sensors.orientations.push_back(o);
  }
  if (sensors.positions.empty()) throw IoError(fmt::format("{}: no sensors", path.string()));
  return sensors;
}

void save_sensors(const std::filesystem::path& path, const SensorArray& sensors) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    const Vector3& p = sensors.positions[s];
    const Vector3& o = sensors.orientations[s];
    out << fmt::format("{} {} {} {} {} {}\n", p.x(), p.y(), p.z(), o.x(), o.y(), o.z());
  }
}

}  // namespace dipsmc
