#pragma once

// Curve set files: grid.csv holds one row of m time points, curves.csv one
// row per curve with the integer label first and the m values after it. No
// header. Reals are written in shortest round-trip form.

#include <regimix/core.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <unistd.h>

namespace regimix {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError("malformed number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string grid_csv(const TimeGrid& grid) {
  std::string s;
  for (Index j = 0; j < grid.size(); ++j) {
    if (j) s += ',';
    s += format_double(grid[j]);
  }
  s += '\n';
  return s;
}

inline std::string curves_csv(const LabeledCurveSet& data) {
  std::string s;
  for (Index i = 0; i < data.n(); ++i) {
    s += std::to_string(data.label(i));
    for (Index j = 0; j < data.m(); ++j) {
      s += ',';
      s += format_double(data.values()(i, j));
    }
    s += '\n';
  }
  return s;
}

/// FNV-1a of the grid's CSV line, as 16 hex digits.
inline std::string grid_fingerprint(const TimeGrid& grid) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : grid_csv(grid)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

inline TimeGrid parse_grid_csv(const std::vector<std::string>& lines) {
  if (lines.size() != 1) throw DataError("grid.csv must contain exactly one row");
  std::vector<double> pts;
  for (auto f : split_csv_line(lines[0])) pts.push_back(parse_double(f));
  return TimeGrid(std::move(pts));
}

inline LabeledCurveSet parse_curves_csv(const std::vector<std::string>& lines, GridPtr grid) {
  const Index m = grid->size();
  MatrixXd values(static_cast<Index>(lines.size()), m);
  std::vector<int> labels;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split_csv_line(lines[i]);
    if (static_cast<Index>(fields.size()) != m + 1)
      throw DataError("curves.csv row " + std::to_string(i + 1) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(m + 1));
    int label = 0;
    const auto lf = fields[0];
    const auto res = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (res.ec != std::errc() || res.ptr != lf.data() + lf.size())
      throw DataError("curves.csv row " + std::to_string(i + 1) + ": label is not an integer");
    labels.push_back(label);
    for (Index j = 0; j < m; ++j) values(static_cast<Index>(i), j) = parse_double(fields[static_cast<std::size_t>(j + 1)]);
  }
  return LabeledCurveSet(std::move(grid), std::move(values), std::move(labels));
}

/// Reads dir/grid.csv and dir/curves.csv.
inline LabeledCurveSet read_dataset(const std::filesystem::path& dir) {
  GridPtr grid = make_grid(parse_grid_csv(read_lines(dir / "grid.csv")));
  return parse_curves_csv(read_lines(dir / "curves.csv"), std::move(grid));
}

/// Writes every (file name, content) pair into `dir`. All contents go to
/// temporary names first and are renamed only once every write succeeded,
/// so a failure leaves no partial outputs behind.
inline void write_files_atomically(const std::filesystem::path& dir,
                                   const std::vector<std::pair<std::string, std::string>>& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("output directory does not exist: " + dir.string());
  std::vector<fs::path> temps;
  auto cleanup = [&] {
    for (const auto& t : temps) fs::remove(t, ec);
  };
  for (const auto& [name, content] : files) {
    const fs::path tmp = dir / ("." + name + ".tmp" + std::to_string(::getpid()));
    temps.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) {
      cleanup();
      throw DataError("cannot write " + (dir / name).string());
    }
  }
  for (std::size_t f = 0; f < files.size(); ++f) {
    fs::rename(temps[f], dir / files[f].first, ec);
    if (ec) {
      cleanup();
      throw DataError("cannot move output into place: " + (dir / files[f].first).string());
    }
  }
}

inline void write_dataset(const std::filesystem::path& dir, const LabeledCurveSet& data) {
  write_files_atomically(dir, {{"grid.csv", grid_csv(data.grid())}, {"curves.csv", curves_csv(data)}});
}

}  // namespace regimix
