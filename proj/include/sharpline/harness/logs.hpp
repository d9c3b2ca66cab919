#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace sharpline::harness {

inline constexpr int kSchemaVersion = 1;

// Round-trip decimal form ("%.17g"); nan and +-inf spelled out.
std::string fmt(double x);
std::string fmt(std::size_t x);
std::string fmt(bool x);

// Append-only CSV. The first column is always schema_version; every row is
// flushed as it is written.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns);
  void row(const std::vector<std::string>& cells);
  std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t width_;
  std::size_t rows_ = 0;
};

// One JSON object per line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path);
  void line(const std::string& json_object);

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of `name` in the header, or npos.
  std::size_t column(const std::string& name) const;
  // Cell parsed as a double; empty cells are nan.
  double number(std::size_t row, std::size_t col) const;
};

// Throws ParseError for unreadable files and ragged rows. An empty file gives
// an empty table.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace sharpline::harness
