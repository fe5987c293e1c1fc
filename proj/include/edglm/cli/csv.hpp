#ifndef EDGLM_CLI_CSV_HPP
#define EDGLM_CLI_CSV_HPP

// Plain comma-separated tables: header row, then numeric rows. Output uses
// the shortest representation that round-trips, and every file lands via a
// temporary sibling and a rename.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "edglm/errors.hpp"
#include "edglm/model_spec.hpp"

namespace edglm::cli {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

// Reads the named columns of a CSV file. A missing column is a config error;
// unreadable files and non-numeric or empty cells are data errors.
inline DataTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& wanted) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": file is empty");
  const std::vector<std::string_view> header = detail::split(line);

  DataTable table;
  std::vector<std::size_t> source;
  std::set<std::string> seen;
  for (const std::string& name : wanted) {
    if (!seen.insert(name).second) continue;
    std::size_t j = 0;
    while (j < header.size() && header[j] != name) ++j;
    if (j == header.size()) {
      throw ConfigError("column '" + name + "' not found in " + path.string());
    }
    table.columns.push_back(name);
    source.push_back(j);
  }

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string_view> cells = detail::split(line);
    std::vector<double> row;
    row.reserve(source.size());
    for (std::size_t k = 0; k < source.size(); ++k) {
      const std::size_t j = source[k];
      const std::string where = path.filename().string() + " row " +
                                std::to_string(rows.size() + 1) + " (line " +
                                std::to_string(line_no) + "), column '" + table.columns[k] + "'";
      if (j >= cells.size() || cells[j].empty()) throw DataError(where + ": missing value");
      double v = 0.0;
      const auto res = std::from_chars(cells[j].data(), cells[j].data() + cells[j].size(), v);
      if (res.ec != std::errc() || res.ptr != cells[j].data() + cells[j].size() ||
          !std::isfinite(v)) {
        throw DataError(where + ": '" + std::string(cells[j]) + "' is not a finite number");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(source.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < source.size(); ++k) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return table;
}

// Rows of already formatted cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::ostringstream os;
    auto put = [&os](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
      os << '\n';
    };
    put(header);
    for (const auto& r : rows) put(r);
    return os.str();
  }
};

// Writes `contents` to a temporary file next to `path`, then renames it.
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace edglm::cli

#endif  // EDGLM_CLI_CSV_HPP
