#include "sharpline/harness/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "sharpline/errors.hpp"

namespace sharpline::harness {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f < 1.5 ? 1 : f < 3 ? 2 : f < 7 ? 5 : 10;
  return nice * mag;
}

struct Range {
  double lo = 0, hi = 1;
};

Range data_range(const Chart& c, bool x_axis) {
  double lo = HUGE_VAL, hi = -HUGE_VAL;
  for (const auto& s : c.series) {
    const auto& v = x_axis ? s.x : s.y;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double a = v[i];
      if (!std::isfinite(a) || !std::isfinite(x_axis ? s.y[i] : s.x[i])) continue;
      if (!x_axis && c.log_y) {
        if (a <= 0) continue;
        a = std::log10(a);
      }
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  }
  if (lo > hi) return {};
  if (lo == hi) {
    const double pad = lo == 0 ? 1 : std::abs(lo) * 0.1;
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - (x_axis ? 0 : pad), hi + (x_axis ? 0 : pad)};
}

}  // namespace

std::string render_svg(const Chart& chart) {
  const Range xr = data_range(chart, true);
  const Range yr = data_range(chart, false);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) {
    const double v = chart.log_y ? std::log10(y) : y;
    return kTop + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph;
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  if (!chart.title.empty()) {
    o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"15\">" << escape(chart.title) << "</text>\n";
  }

  // Axes and ticks.
  o << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\"/>\n</g>\n";
  o << "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  const double xs = nice_step(xr.hi - xr.lo, 6);
  for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + 1e-9 * xs; t += xs) {
    const double x = px(t);
    o << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(x) << "\" y2=\""
      << num(kTop + ph + 5) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
      << tick_label(t) << "</text>\n";
  }
  const double ys = nice_step(yr.hi - yr.lo, 6);
  for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + 1e-9 * ys; t += ys) {
    const double y = kTop + ph - (t - yr.lo) / (yr.hi - yr.lo) * ph;
    o << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft) << "\" y2=\"" << num(y)
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
      << tick_label(chart.log_y ? std::pow(10.0, t) : t) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 16)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(chart.x_label)
    << "</text>\n";
  o << "<text x=\"18\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"13\" transform=\"rotate(-90 18 " << num(kTop + ph / 2) << ")\">" << escape(chart.y_label)
    << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const Series& s = chart.series[k];
    const char* color = s.dashed ? "#555555" : kPalette[k % kPalette.size()];
    o << "<g class=\"series\" data-series=\"" << escape(s.label) << "\">\n";
    std::vector<std::vector<std::pair<double, double>>> runs(1);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const bool ok = std::isfinite(s.x[i]) && std::isfinite(s.y[i]) && (!chart.log_y || s.y[i] > 0);
      if (!ok) {
        if (!runs.back().empty()) runs.emplace_back();
        continue;
      }
      runs.back().emplace_back(px(s.x[i]), py(s.y[i]));
    }
    if (!s.scatter) {
      for (const auto& run : runs) {
        if (run.empty()) continue;
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << (s.dashed ? "1.5" : "1.8")
          << '"';
        if (s.dashed) o << " stroke-dasharray=\"6,4\"";
        o << " points=\"";
        for (std::size_t i = 0; i < run.size(); ++i) o << (i ? " " : "") << num(run[i].first) << ',' << num(run[i].second);
        o << "\"/>\n";
      }
    }
    if (s.markers || s.scatter) {
      for (const auto& run : runs) {
        for (const auto& [x, y] : run) {
          o << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
      }
    }
    o << "</g>\n";
  }

  // Legend.
  o << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const Series& s = chart.series[k];
    const char* color = s.dashed ? "#555555" : kPalette[k % kPalette.size()];
    const double y = kTop + 10 + 20.0 * static_cast<double>(k);
    const double x = kLeft + pw + 12;
    o << "<line x1=\"" << num(x) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x + 24) << "\" y2=\"" << num(y)
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "")
      << "/>";
    o << "<text x=\"" << num(x + 30) << "\" y=\"" << num(y + 4) << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

namespace {

void check_columns(const CsvTable& t, const std::set<std::string>& allowed, const std::vector<std::string>& required,
                   PlotKind kind) {
  for (const auto& h : t.header) {
    if (!allowed.count(h)) throw SchemaError("unknown column '" + h + "' for " + to_string(kind) + " plot");
  }
  if (t.header.empty()) return;
  for (const auto& r : required) {
    if (t.column(r) == std::string::npos) {
      throw SchemaError("missing column '" + r + "' for " + to_string(kind) + " plot");
    }
  }
}

std::vector<double> column_values(const CsvTable& t, const std::string& name) {
  std::vector<double> v;
  const std::size_t c = t.column(name);
  if (c == std::string::npos) return v;
  for (std::size_t r = 0; r < t.rows.size(); ++r) v.push_back(t.number(r, c));
  return v;
}

bool any_finite(const std::vector<double>& v) {
  return std::any_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Chart chart_from_table(PlotKind kind, const CsvTable& t, const std::string& title) {
  Chart c;
  c.title = title;
  switch (kind) {
    case PlotKind::sharpness_vs_step: {
      check_columns(t,
                    {"schema_version", "step", "lr", "eos_line", "threshold", "lambda_c", "eta_c", "eta_lower",
                     "eta_upper", "forward_passes", "degenerate", "warm_started", "lambda_dir", "lambda_h",
                     "lambda_ph", "lambda_rel"},
                    {"step"}, kind);
      c.x_label = "step";
      c.y_label = "sharpness";
      const auto steps = column_values(t, "step");
      const std::vector<std::pair<std::string, std::string>> measures{{"lambda_c", "critical"},
                                                                      {"lambda_dir", "directional"},
                                                                      {"lambda_h", "Hessian"},
                                                                      {"lambda_ph", "pre-conditioned"},
                                                                      {"lambda_rel", "relative"}};
      for (const auto& [col, label] : measures) {
        auto y = column_values(t, col);
        if (any_finite(y)) c.series.push_back(Series{label, steps, std::move(y)});
      }
      const auto eos = column_values(t, "eos_line");
      if (any_finite(eos)) c.series.push_back(Series{"2/eta", steps, eos, true});
      const auto thr = column_values(t, "threshold");
      if (any_finite(thr) && thr != eos) c.series.push_back(Series{"threshold", steps, thr, true});
      break;
    }
    case PlotKind::boundary_map: {
      check_columns(t,
                    {"schema_version", "optimizer", "variable", "lambda", "eta", "gamma", "beta1", "predicted",
                     "empirical", "rel_error", "tolerance", "status"},
                    {"optimizer", "predicted", "empirical"}, kind);
      c.x_label = "grid cell";
      c.y_label = "empirical / predicted boundary";
      const std::size_t oc = t.column("optimizer");
      std::vector<std::string> names;
      for (const auto& row : t.rows) {
        if (std::find(names.begin(), names.end(), row[oc]) == names.end()) names.push_back(row[oc]);
      }
      const auto pred = column_values(t, "predicted");
      const auto emp = column_values(t, "empirical");
      for (const auto& name : names) {
        Series s{name, {}, {}};
        s.scatter = true;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
          if (t.rows[r][oc] != name) continue;
          s.x.push_back(static_cast<double>(r));
          s.y.push_back(emp[r] / pred[r]);
        }
        c.series.push_back(std::move(s));
      }
      if (!t.rows.empty()) {
        c.series.push_back(Series{"exact", {0.0, static_cast<double>(t.rows.size() - 1)}, {1.0, 1.0}, true});
      }
      break;
    }
    case PlotKind::sweep: {
      check_columns(t,
                    {"schema_version", "ratio", "lambda_a_mean", "lambda_a_sd", "lambda_b_mean", "lambda_b_sd",
                     "lambda_plain_a", "probe_batches", "degenerate_a", "degenerate_b"},
                    {"ratio", "lambda_a_mean", "lambda_b_mean"}, kind);
      c.x_label = "task A fraction in the mix";
      c.y_label = "relative critical sharpness";
      const auto ratio = column_values(t, "ratio");
      Series a{"A -> mix", ratio, column_values(t, "lambda_a_mean")};
      Series b{"B -> mix", ratio, column_values(t, "lambda_b_mean")};
      a.markers = b.markers = true;
      double lo = HUGE_VAL, hi = 0;
      for (const auto* s : {&a, &b}) {
        for (double y : s->y) {
          if (std::isfinite(y) && y > 0) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
          }
        }
      }
      c.log_y = hi > 0 && hi / lo > 20;
      if (!t.rows.empty()) {
        c.series.push_back(std::move(a));
        c.series.push_back(std::move(b));
      }
      break;
    }
  }
  return c;
}

}  // namespace sharpline::harness
