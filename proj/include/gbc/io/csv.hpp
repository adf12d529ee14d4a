#pragma once

#include "gbc/core/dataset.hpp"
#include "gbc/core/types.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace gbc::io {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t"), e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

inline double parse_double(const std::string& s, std::size_t row, std::size_t col, const std::string& path) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IngestionError(path + ": row " + std::to_string(row) + ", column " + std::to_string(col) +
                         ": cannot parse '" + s + "' as a number");
  return v;
}

/// Parsed CSV table: header names and numeric rows. Lines starting with '#'
/// and blank lines are skipped; row numbers in errors count data rows from 1.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name, const std::string& path) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    std::string have;
    for (const auto& h : header) have += (have.empty() ? "" : ", ") + h;
    throw IngestionError(path + ": missing column '" + name + "' (have: " + have + ")");
  }
};

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path + ": cannot open file");
  Table t;
  std::string line;
  bool have_header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto fields = split_fields(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    ++row;
    if (fields.size() != t.header.size())
      throw IngestionError(path + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                           " fields, header has " + std::to_string(t.header.size()));
    std::vector<double> vals(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) vals[j] = parse_double(fields[j], row, j + 1, path);
    t.rows.push_back(std::move(vals));
  }
  if (!have_header) throw IngestionError(path + ": empty file");
  if (t.rows.empty()) throw IngestionError(path + ": no data rows");
  return t;
}

/// Loads inputs and response by column name. Empty `inputs` selects every
/// column other than the response and the optional `truth` / `regime` columns.
inline Dataset load_csv(const std::string& path, std::vector<std::string> inputs, const std::string& response) {
  const Table t = read_table(path);
  const std::size_t ycol = t.column(response, path);
  auto find = [&](const std::string& name) -> std::ptrdiff_t {
    for (std::size_t j = 0; j < t.header.size(); ++j)
      if (t.header[j] == name) return static_cast<std::ptrdiff_t>(j);
    return -1;
  };
  const auto tcol = find("truth"), rcol = find("regime");
  if (inputs.empty())
    for (std::size_t j = 0; j < t.header.size(); ++j)
      if (j != ycol && static_cast<std::ptrdiff_t>(j) != tcol && static_cast<std::ptrdiff_t>(j) != rcol)
        inputs.push_back(t.header[j]);
  if (inputs.empty()) throw IngestionError(path + ": no input columns");
  std::vector<std::size_t> xcols;
  for (const auto& name : inputs) xcols.push_back(t.column(name, path));

  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Dataset ds;
  ds.X.resize(n, static_cast<Eigen::Index>(xcols.size()));
  ds.y.resize(n);
  if (tcol >= 0) ds.truth = VectorXd(n);
  if (rcol >= 0) ds.regime = std::vector<int>(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = t.rows[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < xcols.size(); ++j) ds.X(i, static_cast<Eigen::Index>(j)) = r[xcols[j]];
    ds.y(i) = r[ycol];
    if (tcol >= 0) (*ds.truth)(i) = r[static_cast<std::size_t>(tcol)];
    if (rcol >= 0) (*ds.regime)[static_cast<std::size_t>(i)] = static_cast<int>(r[static_cast<std::size_t>(rcol)]);
  }
  if (!ds.X.allFinite() || !ds.y.allFinite()) throw IngestionError(path + ": non-finite value in inputs or response");
  ds.input_names = inputs;
  ds.response_name = response;
  ds.provenance = "csv " + path;
  return ds;
}

/// Writes inputs, response and any truth / regime columns. `comment` lines
/// are emitted first, each prefixed with "# ".
inline void save_csv(const Dataset& ds, const std::string& path, const std::vector<std::string>& comment = {}) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw IngestionError(path + ": cannot open for writing");
  for (const auto& c : comment) out << "# " << c << '\n';
  const auto names = ds.column_names();
  for (const auto& nm : names) out << nm << ',';
  out << ds.response_name;
  if (ds.truth) out << ",truth";
  if (ds.regime) out << ",regime";
  out << '\n';
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) out << format_double(ds.X(i, j)) << ',';
    out << format_double(ds.y(i));
    if (ds.truth) out << ',' << format_double((*ds.truth)(i));
    if (ds.regime) out << ',' << (*ds.regime)[static_cast<std::size_t>(i)];
    out << '\n';
  }
  if (!out) throw IngestionError(path + ": write failed");
}

}  // namespace gbc::io
