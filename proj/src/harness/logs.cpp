#include "sharpline/harness/logs.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "sharpline/errors.hpp"

namespace sharpline::harness {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt(std::size_t x) { return std::to_string(x); }

std::string fmt(bool x) { return x ? "true" : "false"; }

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
    : out_(path, std::ios::binary | std::ios::trunc), width_(columns.size()) {
  if (!out_) throw Error("cannot write " + path.string());
  out_ << "schema_version";
  for (const auto& c : columns) out_ << ',' << c;
  out_ << '\n';
  out_.flush();
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw LengthMismatch("csv row", width_, cells.size());
  out_ << kSchemaVersion;
  for (const auto& c : cells) out_ << ',' << c;
  out_ << '\n';
  out_.flush();
  ++rows_;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error("cannot write " + path.string());
}

void JsonlWriter::line(const std::string& json_object) {
  out_ << json_object << '\n';
  out_.flush();
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::string::npos;
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& cell = rows.at(row).at(col);
  if (cell.empty()) return std::nan("");
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) {
    throw ParseError("csv", row + 2, "non-numeric cell '" + cell + "' in column " + header.at(col));
  }
  return v;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(t.header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace sharpline::harness
