#pragma once

// Plot data emission: one CSV (series,step,iqm,ci_low,ci_high) and one SVG
// line chart with CI bands per figure in an aggregate.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crossq/experiment/aggregate.hpp"
#include "crossq/experiment/metrics.hpp"

namespace crossq::experiment {

inline constexpr const char* kPlotHeader = "series,step,iqm,ci_low,ci_high";

namespace svg {

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  return palette[i % (sizeof palette / sizeof palette[0])];
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace svg

inline std::string render_svg(const std::string& figure, const std::map<std::string, std::vector<AggregateRow>>& series) {
  constexpr double width = 640, height = 400, left = 70, right = 160, top = 30, bottom = 50;
  double x0 = std::numeric_limits<double>::max(), x1 = std::numeric_limits<double>::lowest();
  double y0 = x0, y1 = x1;
  for (const auto& [name, rows] : series) {
    for (const auto& r : rows) {
      x0 = std::min(x0, static_cast<double>(r.step));
      x1 = std::max(x1, static_cast<double>(r.step));
      y0 = std::min({y0, r.ci_low, r.iqm});
      y1 = std::max({y1, r.ci_high, r.iqm});
    }
  }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pw = width - left - right, ph = height - top - bottom;
  const auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"14\">" << svg::escape(figure) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0;
    const double xv = x0 + (x1 - x0) * k / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << svg::fmt(yv) << "</text>\n";
    os << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << svg::fmt(xv)
       << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">env step</text>\n";

  std::size_t i = 0;
  for (const auto& [name, rows] : series) {
    const char* c = svg::color(i);
    if (rows.size() > 1) {
      os << "<polygon fill=\"" << c << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (const auto& r : rows) os << px(static_cast<double>(r.step)) << ',' << py(r.ci_high) << ' ';
      for (auto it = rows.rbegin(); it != rows.rend(); ++it) os << px(static_cast<double>(it->step)) << ',' << py(it->ci_low) << ' ';
      os << "\"/>\n";
      os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
      for (const auto& r : rows) os << px(static_cast<double>(r.step)) << ',' << py(r.iqm) << ' ';
      os << "\"/>\n";
    }
    for (const auto& r : rows) {
      const double x = px(static_cast<double>(r.step));
      os << "<line x1=\"" << x << "\" y1=\"" << py(r.ci_low) << "\" x2=\"" << x << "\" y2=\"" << py(r.ci_high)
         << "\" stroke=\"" << c << "\"/>\n";
      os << "<circle cx=\"" << x << "\" cy=\"" << py(r.iqm) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    }
    const double ly = top + 16.0 * static_cast<double>(i) + 8;
    os << "<rect x=\"" << left + pw + 12 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"8\" fill=\"" << c << "\"/>\n";
    os << "<text x=\"" << left + pw + 30 << "\" y=\"" << ly << "\">" << svg::escape(name) << "</text>\n";
    ++i;
  }
  os << "</svg>\n";
  return os.str();
}

/// Writes <figure>.csv and <figure>.svg into `out_dir` for every figure in
/// `rows`; returns the written paths. No rows, no files.
inline std::vector<std::filesystem::path> emit_plot_data(const std::vector<AggregateRow>& rows,
                                                         const std::filesystem::path& out_dir) {
  std::map<std::string, std::map<std::string, std::vector<AggregateRow>>> figures;
  for (const auto& r : rows) figures[r.figure][r.series].push_back(r);
  std::vector<std::filesystem::path> written;
  if (figures.empty()) return written;
  std::filesystem::create_directories(out_dir);
  for (auto& [figure, series] : figures) {
    for (auto& [name, list] : series) {
      std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
    }
    const auto csv = out_dir / (figure + ".csv");
    {
      std::ofstream out(csv, std::ios::trunc);
      if (!out) throw ConfigError("cannot write '" + csv.string() + "'");
      out << kPlotHeader << '\n';
      for (const auto& [name, list] : series) {
        for (const auto& r : list) {
          out << name << ',' << r.step << ',' << format_number(r.iqm) << ',' << format_number(r.ci_low) << ','
              << format_number(r.ci_high) << '\n';
        }
      }
    }
    const auto svg_path = out_dir / (figure + ".svg");
    {
      std::ofstream out(svg_path, std::ios::trunc);
      if (!out) throw ConfigError("cannot write '" + svg_path.string() + "'");
      out << render_svg(figure, series);
    }
    written.push_back(csv);
    written.push_back(svg_path);
  }
  return written;
}

}  // namespace crossq::experiment
