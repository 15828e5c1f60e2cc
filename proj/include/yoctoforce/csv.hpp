#pragma once

// CSV emission and small file helpers. Every table carries #-prefixed
// metadata lines (schema, seed, config hash) ahead of the header row, and
// numbers are written with 12 significant digits so reruns with the same
// seed produce byte-identical files. Frequencies are written in Hz.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace yf::io {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct Table {
  std::string schema;  // e.g. "yf.sweep.v1"
  std::vector<std::pair<std::string, std::string>> meta;  // seed, config_hash, ...
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const {
    std::string s;
    s += "# schema=" + schema + "\n";
    for (const auto& [k, v] : meta) s += "# " + k + "=" + v + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      s += (i ? "," : "") + columns[i];
    s += "\n";
    for (const auto& row : rows) {
      if (row.size() != columns.size())
        throw std::logic_error("csv table row width " +
                               std::to_string(row.size()) + " != " +
                               std::to_string(columns.size()) + " columns");
      for (std::size_t i = 0; i < row.size(); ++i)
        s += (i ? "," : "") + format_number(row[i]);
      s += "\n";
    }
    return s;
  }
};

inline void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec)
      throw std::runtime_error("cannot create directory '" +
                               p.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

} // namespace yf::io
