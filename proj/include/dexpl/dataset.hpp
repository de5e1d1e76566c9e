#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dexpl/errors.hpp"
#include "dexpl/linalg.hpp"

namespace dexpl {

struct DataTable {
  Matrix values;
  std::vector<std::string> names;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_line(const std::string& line, char delim = ',') {
  std::vector<std::string> cells;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = line.find(delim, begin);
    if (comma == std::string::npos) {
      cells.push_back(trim(line.substr(begin)));
      break;
    }
    cells.push_back(trim(line.substr(begin, comma - begin)));
    begin = comma + 1;
  }
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t data_row,
                         const std::string& column_name) {
  const std::string where =
      "row " + std::to_string(data_row) + ", column \"" + column_name + "\"";
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || cell.empty())
    throw ParseError(where + ": cannot parse \"" + cell + "\" as a number");
  if (!std::isfinite(value))
    throw ParseError(where + ": non-finite value \"" + cell + "\"");
  return value;
}

}  // namespace detail

/// Reads a delimited text file with a header row of feature names and
/// numeric cells. Bad cells are rejected with their data row (1-based) and
/// column name.
inline DataTable parse_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset: empty file, missing header");
  DataTable table;
  table.names = detail::split_line(line);
  for (std::size_t c = 0; c < table.names.size(); ++c)
    if (table.names[c].empty())
      throw ParseError("dataset: header column " + std::to_string(c + 1) + " is empty");

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++data_row;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split_line(line);
    if (cells.size() != table.names.size())
      throw ParseError("row " + std::to_string(data_row) + ": expected " +
                       std::to_string(table.names.size()) + " columns, got " +
                       std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c)
      values.push_back(detail::parse_cell(cells[c], data_row, table.names[c]));
    ++rows;
  }
  table.values = Matrix(rows, table.names.size());
  table.values.data = std::move(values);
  return table;
}

inline DataTable load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file \"" + path + "\"");
  return parse_dataset(in);
}

struct StandardizationStats {
  Vector means;
  Vector stds;
  enum class Source { computed, loaded } source = Source::computed;
};

/// Population (1/N) statistics by default; sample (1/(N-1)) on request.
inline StandardizationStats compute_stats(const Matrix& data, bool population = true) {
  if (data.rows == 0) throw Error("compute_stats: empty matrix");
  StandardizationStats stats;
  stats.source = StandardizationStats::Source::computed;
  stats.means.assign(data.cols, 0.0);
  stats.stds.assign(data.cols, 0.0);
  for (std::size_t c = 0; c < data.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < data.rows; ++r) mean += data(r, c);
    mean /= static_cast<double>(data.rows);
    double ss = 0.0;
    for (std::size_t r = 0; r < data.rows; ++r) {
      const double d = data(r, c) - mean;
      ss += d * d;
    }
    const double denom =
        population ? static_cast<double>(data.rows)
                   : static_cast<double>(data.rows > 1 ? data.rows - 1 : 1);
    const double sd = std::sqrt(ss / denom);
    if (!(sd > 0.0)) throw ZeroVariance(c);
    stats.means[c] = mean;
    stats.stds[c] = sd;
  }
  return stats;
}

/// (x - mean) / std per column. Stats are computed from the matrix itself
/// when not supplied.
inline std::pair<Matrix, StandardizationStats> standardize(
    const Matrix& data, std::optional<StandardizationStats> stats = std::nullopt,
    bool population = true) {
  StandardizationStats s = stats ? std::move(*stats) : compute_stats(data, population);
  if (s.means.size() != data.cols || s.stds.size() != data.cols)
    throw DimensionError("standardize: stats length does not match column count");
  for (std::size_t c = 0; c < data.cols; ++c)
    if (!(s.stds[c] > 0.0)) throw ZeroVariance(c);
  Matrix out = data;
  for (std::size_t r = 0; r < data.rows; ++r)
    for (std::size_t c = 0; c < data.cols; ++c)
      out(r, c) = (data(r, c) - s.means[c]) / s.stds[c];
  return {std::move(out), std::move(s)};
}

/// Sidecar format: header "mean,std", one row per feature in column order.
inline StandardizationStats parse_stats(std::istream& in) {
  DataTable table = parse_dataset(in);
  if (table.names.size() != 2 || table.names[0] != "mean" || table.names[1] != "std")
    throw ParseError("stats file: expected header \"mean,std\"");
  StandardizationStats stats;
  stats.source = StandardizationStats::Source::loaded;
  for (std::size_t r = 0; r < table.values.rows; ++r) {
    stats.means.push_back(table.values(r, 0));
    stats.stds.push_back(table.values(r, 1));
    if (!(table.values(r, 1) > 0.0)) throw ZeroVariance(r);
  }
  return stats;
}

inline StandardizationStats load_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open stats file \"" + path + "\"");
  return parse_stats(in);
}

}  // namespace dexpl
