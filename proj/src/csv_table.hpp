#pragma once

#include "cann/error.hpp"
#include "cann/numfmt.hpp"

#include <cmath>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

namespace cann::detail {

// Numeric CSV with a fixed header line; '#' lines and blank lines are skipped.
inline std::vector<std::vector<double>> read_numeric_csv(std::istream& in, const std::string& header,
                                                         const std::string& what) {
  std::vector<std::vector<double>> rows;
  bool have_header = false;
  std::size_t ncol = 1;
  for (char c : header)
    ncol += c == ',';
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    if (!have_header) {
      if (line != header)
        throw ConfigError(what + ": expected header '" + header + "'");
      have_header = true;
      continue;
    }
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string t; std::getline(ls, t, ',');) {
      double v;
      if (!parse_double(t, v) || !std::isfinite(v))
        throw ConfigError(what + " line " + std::to_string(lineno) + ": bad number '" + t + "'");
      row.push_back(v);
    }
    if (row.size() != ncol)
      throw ConfigError(what + " line " + std::to_string(lineno) + ": expected " + std::to_string(ncol) +
                        " fields");
    rows.push_back(std::move(row));
  }
  if (!have_header)
    throw ConfigError(what + " has no header");
  return rows;
}

} // namespace cann::detail
