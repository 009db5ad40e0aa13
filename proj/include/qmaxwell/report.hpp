#pragma once

// Tabular output: CSV with 17 significant digits, or the same table as JSON.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "qmaxwell/errors.hpp"

namespace qmx {

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw Error("table row width does not match the header");
    rows.push_back(std::move(row));
  }
};

/// %.17g, which round-trips every double.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return format_double(*d);
  if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  return out;
}

inline void write_csv(const std::filesystem::path& path, const Table& t) {
  std::ofstream out = open_output(path);
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_cell(row[i]);
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

inline nlohmann::json to_json(const Table& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json r = nlohmann::json::object();
    for (std::size_t i = 0; i < row.size(); ++i)
      std::visit([&](const auto& v) { r[t.columns[i]] = v; }, row[i]);
    rows.push_back(std::move(r));
  }
  return {{"columns", t.columns}, {"rows", std::move(rows)}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

/// Writes `<stem>.csv` or `<stem>.json` according to `format`; returns the
/// file name written.
inline std::string write_table(const std::filesystem::path& dir, const std::string& stem, const Table& t,
                               const std::string& format) {
  if (format == "json") {
    write_json(dir / (stem + ".json"), to_json(t));
    return stem + ".json";
  }
  write_csv(dir / (stem + ".csv"), t);
  return stem + ".csv";
}

}  // namespace qmx
