#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace btw::csv {

struct MalformedCsv : std::runtime_error {
  explicit MalformedCsv(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic numeric formatting for emitted artifacts.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}
inline std::string fmt(std::uint64_t v) { return std::to_string(v); }
inline std::string fmt(std::int64_t v) { return std::to_string(v); }

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  }
  // '#'-prefixed description line (units, censoring semantics)
  void comment(const std::string& text) { out_ << "# " << text << "\n"; }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ",";
      out_ << cells[i];
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedCsv("cannot open: " + path);
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (t.header.empty())
      t.header = std::move(cells);
    else {
      if (cells.size() != t.header.size())
        throw MalformedCsv("ragged row in " + path);
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw MalformedCsv("no header row in " + path);
  return t;
}

}  // namespace btw::csv
