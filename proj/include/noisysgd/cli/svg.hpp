#pragma once

// Self-contained SVG line charts.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "noisysgd/cli/csv.hpp"
#include "noisysgd/error.hpp"

namespace noisysgd::cli {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct LinePlot {
  std::string title;
  std::string xlabel = "step";
  std::string ylabel;
  std::vector<Series> series;
};

struct PlotFrame {
  double width = 860, height = 500;
  double left = 90, right = 640, top = 50, bottom = 430;  // plot area in pixels
};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string render_svg(const LinePlot& plot, const PlotFrame& f = {}) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  std::size_t drawn = 0;
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw ShapeError("render_svg: series \"" + s.name + "\" has mismatched x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
      ++drawn;
    }
  }
  if (drawn == 0) throw InvalidArgument("render_svg: no finite data points");
  const double xspan = xmax > xmin ? xmax - xmin : 1.0;
  const double yspan = ymax > ymin ? ymax - ymin : 1.0;
  auto px = [&](double x) { return f.left + (x - xmin) / xspan * (f.right - f.left); };
  auto py = [&](double y) { return f.bottom - (y - ymin) / yspan * (f.bottom - f.top); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream o;
  o.precision(17);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
    << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << (f.left + f.right) / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">" << xml_escape(plot.title) << "</text>\n";
  o << "<g class=\"axes\" data-xmin=\"" << format_double(xmin) << "\" data-xmax=\"" << format_double(xmax)
    << "\" data-ymin=\"" << format_double(ymin) << "\" data-ymax=\"" << format_double(ymax) << "\">\n";
  o << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.right - f.left << "\" height=\""
    << f.bottom - f.top << "\" fill=\"none\" stroke=\"black\"/>\n";
  constexpr int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double fx = xmin + xspan * i / ticks;
    const double fy = ymin + yspan * i / ticks;
    char lx[32], ly[32];
    std::snprintf(lx, sizeof lx, "%.6g", fx);
    std::snprintf(ly, sizeof ly, "%.6g", fy);
    o << "<line x1=\"" << px(fx) << "\" y1=\"" << f.bottom << "\" x2=\"" << px(fx) << "\" y2=\"" << f.bottom + 5
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << px(fx) << "\" y=\"" << f.bottom + 20
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << lx << "</text>\n";
    o << "<line x1=\"" << f.left - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << f.left << "\" y2=\"" << py(fy)
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << f.left - 8 << "\" y=\"" << py(fy) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << ly << "</text>\n";
  }
  o << "<text x=\"" << (f.left + f.right) / 2 << "\" y=\"" << f.bottom + 45
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xml_escape(plot.xlabel)
    << "</text>\n";
  o << "<text transform=\"translate(22," << (f.top + f.bottom) / 2
    << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
    << xml_escape(plot.ylabel) << "</text>\n";
  o << "</g>\n";

  std::size_t idx = 0;
  double legend_y = f.top + 10;
  for (const auto& s : plot.series) {
    const char* color = palette[idx++ % std::size(palette)];
    std::ostringstream pts;
    pts.precision(17);
    bool any = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts << (any ? " " : "") << px(s.x[i]) << ',' << py(s.y[i]);
      any = true;
    }
    if (!any) continue;
    o << "<polyline class=\"series\" data-name=\"" << xml_escape(s.name) << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    o << "<g class=\"legend\"><line x1=\"" << f.right + 20 << "\" y1=\"" << legend_y << "\" x2=\"" << f.right + 45
      << "\" y2=\"" << legend_y << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << f.right + 52 << "\" y=\"" << legend_y + 4
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(s.name) << "</text></g>\n";
    legend_y += 18;
  }
  o << "</svg>\n";
  return o.str();
}

enum class PlotKind { Norm, Active, Error, Bias };

inline PlotKind parse_plot_kind(const std::string& s) {
  if (s == "norm") return PlotKind::Norm;
  if (s == "active") return PlotKind::Active;
  if (s == "error") return PlotKind::Error;
  if (s == "bias") return PlotKind::Bias;
  throw InvalidArgument("unknown plot kind \"" + s + "\" (norm, active, error, bias)");
}

inline std::string series_label(const std::string& path) {
  const std::filesystem::path p(path);
  const auto parent = p.parent_path().filename().string();
  return parent.empty() ? p.stem().string() : parent;
}

/// One series per (file, run_id, quantity); error plots carry train and test.
inline LinePlot plot_from_tables(PlotKind kind, const std::vector<std::pair<std::string, CsvTable>>& tables) {
  LinePlot plot;
  switch (kind) {
    case PlotKind::Norm: plot.title = "Weight norm"; plot.ylabel = "total weight norm"; break;
    case PlotKind::Active: plot.title = "Typical number of active neurons"; plot.ylabel = "active neurons"; break;
    case PlotKind::Error: plot.title = "Classification error"; plot.ylabel = "error"; break;
    case PlotKind::Bias: plot.title = "Mean hidden bias"; plot.ylabel = "mean bias"; break;
  }
  for (const auto& [path, t] : tables) {
    const auto need = [&](const char* c) {
      const auto i = t.column(c);
      if (!i) throw FormatError(path + ": missing column \"" + std::string(c) + "\"");
      return *i;
    };
    const std::size_t run_col = need("run_id"), step_col = need("step");
    std::vector<std::size_t> norm_cols;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      if (t.header[i].rfind("norm_", 0) == 0) norm_cols.push_back(i);
    }
    std::vector<std::pair<std::string, std::size_t>> quantities;
    switch (kind) {
      case PlotKind::Norm:
        if (norm_cols.empty()) throw FormatError(path + ": no norm_ columns");
        quantities = {{"", 0}};
        break;
      case PlotKind::Active: quantities = {{" train", need("active_train")}, {" test", need("active_test")}}; break;
      case PlotKind::Error: quantities = {{" train", need("err_train")}, {" test", need("err_test")}}; break;
      case PlotKind::Bias: quantities = {{"", need("mean_bias")}}; break;
    }
    std::map<long long, std::size_t> runs;
    for (const auto& row : t.rows) runs.emplace(std::llround(row[run_col]), runs.size());
    const std::string base = series_label(path);
    for (const auto& [run, unused] : runs) {
      for (const auto& [suffix, col] : quantities) {
        Series s;
        s.name = base + (runs.size() > 1 ? " run " + std::to_string(run) : "") + suffix;
        for (const auto& row : t.rows) {
          if (std::llround(row[run_col]) != run) continue;
          double y = 0.0;
          if (kind == PlotKind::Norm) {
            for (std::size_t c : norm_cols) y += row[c] * row[c];
            y = std::sqrt(y);
          } else {
            y = row[col];
          }
          s.x.push_back(row[step_col]);
          s.y.push_back(y);
        }
        const bool finite = std::any_of(s.y.begin(), s.y.end(), [](double v) { return std::isfinite(v); });
        if (finite) plot.series.push_back(std::move(s));
      }
    }
  }
  if (plot.series.empty()) throw FormatError("no plottable values in the given files");
  return plot;
}

}  // namespace noisysgd::cli
