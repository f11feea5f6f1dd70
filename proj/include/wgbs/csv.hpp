#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wgbs/error.hpp"

namespace wgbs {

/// Column-oriented CSV table. Leading `#` lines are provenance comments and
/// are preserved on read. All numeric output is printed with %.17g so files
/// round-trip and runs diff byte-for-byte.
struct CsvTable {
  std::vector<std::string> comments;  // without leading '#'
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw config_error("csv: no column named '" + name + "'");
  }

  std::vector<double> column(const std::string& name) const {
    const std::size_t c = col(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string csv_to_string(const CsvTable& t) {
  std::ostringstream out;
  for (const auto& c : t.comments) out << "# " << c << "\n";
  for (std::size_t i = 0; i < t.header.size(); ++i)
    out << t.header[i] << (i + 1 < t.header.size() ? "," : "");
  out << "\n";
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw config_error("csv: row width mismatch");
    for (std::size_t i = 0; i < r.size(); ++i)
      out << format_double(r[i]) << (i + 1 < r.size() ? "," : "");
    out << "\n";
  }
  return out.str();
}

inline void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot open for writing: " + path);
  out << csv_to_string(t);
  if (!out) throw config_error("write failed: " + path);
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open csv: " + path);
  CsvTable t;
  std::string line;
  bool saw_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::size_t b = 1;
      while (b < line.size() && line[b] == ' ') ++b;
      t.comments.push_back(line.substr(b));
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      cells.push_back(line.substr(start, end - start));
      start = end + 1;
    }
    if (!saw_header) {
      t.header = cells;
      saw_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw config_error(path + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(t.header.size()) + " columns, got " +
                         std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        throw config_error(path + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
      }
      if (used != c.size())
        throw config_error(path + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (!saw_header) throw config_error(path + ": empty csv");
  return t;
}

}  // namespace wgbs
