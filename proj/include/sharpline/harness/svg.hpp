#pragma once

#include <string>
#include <vector>

#include "sharpline/harness/config.hpp"
#include "sharpline/harness/logs.hpp"

namespace sharpline::harness {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
  bool markers = false;
  // Markers only, no connecting line.
  bool scatter = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<Series> series;
};

// Fixed 720x440 canvas. Non-finite points split a line into separate
// polylines. Output depends only on the chart contents.
std::string render_svg(const Chart& chart);

// Builds the chart for a log of the given kind. Throws SchemaError when the
// table has columns the kind does not know or lacks a required one.
Chart chart_from_table(PlotKind kind, const CsvTable& table, const std::string& title = "");

}  // namespace sharpline::harness
