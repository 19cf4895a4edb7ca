#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dipsmc/errors.hpp"

namespace dipsmc::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw IoError(fmt::format("missing column '{}'", name));
  }
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

inline Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(fmt::format("{}: missing header row", path.string()));
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size()) {
      throw IoError(fmt::format("{}: row {} has {} fields, header has {}", path.string(), t.rows.size() + 2,
                                row.size(), t.header.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline double to_double(const std::string& s, const std::filesystem::path& path) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError(fmt::format("{}: bad number '{}'", path.string(), s));
  }
  return v;
}

inline std::size_t to_size(const std::string& s, const std::filesystem::path& path) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError(fmt::format("{}: bad integer '{}'", path.string(), s));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path) {
    if (!out_) throw IoError(fmt::format("cannot write {}", path.string()));
  }
  ~Writer() = default;

  void line(const std::string& s) { out_ << s << '\n'; }
  void close() {
    out_.close();
    if (!out_) throw IoError(fmt::format("write failed for {}", path_.string()));
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace dipsmc::csv
