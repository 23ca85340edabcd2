#pragma once

// Minimal CSV I/O used for all run artifacts. Floats are written with 17
// significant digits so runs round-trip exactly and identical runs produce
// byte-identical files. Files are written to a temporary name and renamed
// into place on close.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgobs {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
      : path_(path), tmp_(path.string() + ".tmp") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + tmp_.string());
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
    n_cols_ = columns.size();
  }

  ~CsvWriter() {
    if (out_.is_open()) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);  // destructor without close(): discard
    }
  }

  void row(const std::vector<double>& values) {
    if (values.size() != n_cols_)
      throw std::invalid_argument("CsvWriter: column count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(values[i]);
    }
    out_ << '\n';
  }

  /// Flush and atomically move the file into place.
  void close() {
    out_.close();
    if (out_.fail()) throw std::runtime_error("CsvWriter: write failed for " + path_.string());
    std::filesystem::rename(tmp_, path_);
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  std::size_t n_cols_ = 0;
};

struct CsvData {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return (int)i;
    return -1;
  }
};

/// Strict reader: every data cell must parse as a double and every row must
/// have the header's column count; violations report the 1-based row number.
inline CsvData read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path.string());
  CsvData data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (line_no == 1) {
      data.columns = cells;
      continue;
    }
    if (cells.size() != data.columns.size())
      throw std::runtime_error("read_csv: row " + std::to_string(line_no) + " of " +
                               path.filename().string() + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(data.columns.size()));
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (const std::string& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0')
        throw std::runtime_error("read_csv: row " + std::to_string(line_no) + " of " +
                                 path.filename().string() + ": cell '" + c +
                                 "' is not a number");
      vals.push_back(v);
    }
    data.rows.push_back(std::move(vals));
  }
  if (data.columns.empty()) throw std::runtime_error("read_csv: empty file " + path.string());
  return data;
}

}  // namespace sgobs
