#pragma once

// metrics.csv / summary.csv writers and a small CSV reader for plotting.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "noisysgd/error.hpp"
#include "noisysgd/train.hpp"

namespace noisysgd::cli {

/// 17 significant digits; nan and inf spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> metrics_header(std::size_t layers) {
  std::vector<std::string> h = {"run_id", "step", "lr"};
  for (std::size_t l = 0; l < layers; ++l) h.push_back("norm_" + std::to_string(l));
  for (const char* c : {"mean_bias", "active_train", "active_test", "err_train", "err_test"}) h.emplace_back(c);
  return h;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
  out << '\n';
}

inline void write_metrics_csv(std::ostream& out, std::uint64_t run_id, const std::vector<MetricsRecord>& metrics,
                              std::size_t layers) {
  write_row(out, metrics_header(layers));
  for (const auto& m : metrics) {
    if (m.layer_norms.size() != layers) throw ShapeError("write_metrics_csv: layer count changed mid-run");
    std::vector<std::string> row = {std::to_string(run_id), std::to_string(m.step), format_double(m.lr)};
    for (double n : m.layer_norms) row.push_back(format_double(n));
    for (double v : {m.mean_bias, m.active_train, m.active_test, m.err_train, m.err_test}) {
      row.push_back(format_double(v));
    }
    write_row(out, row);
  }
}

struct SummaryRow {
  double p = 0.0;
  std::string metric;
  std::size_t runs = 0;
  double mean = 0.0;
  std::optional<double> stderr_;
};

/// One row per (p, aggregate) from the final record of each run.
inline std::vector<SummaryRow> summary_rows(double p, std::span<const RunResult> results) {
  const RunSummary s = summarize(results);
  std::vector<SummaryRow> rows;
  const std::pair<const char*, const MeanStderr*> metrics[] = {
      {"err_train", &s.err_train},       {"err_test", &s.err_test},   {"active_train", &s.active_train},
      {"active_test", &s.active_test},   {"total_norm", &s.total_norm}, {"mean_bias", &s.mean_bias},
      {"steps", &s.steps}};
  for (const auto& [name, ms] : metrics) rows.push_back({p, name, s.runs, ms->mean, ms->stderr_});
  return rows;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  write_row(out, {"p", "metric", "runs", "mean", "stderr"});
  for (const auto& r : rows) {
    write_row(out, {format_double(r.p), r.metric, std::to_string(r.runs), format_double(r.mean),
                    r.stderr_ ? format_double(*r.stderr_) : "nan"});
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_cell(const std::string& cell) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size()) throw FormatError("not a number: \"" + cell + "\"");
  return v;
}

/// Numeric CSV with a header row. Errors name the offending 1-based line.
inline CsvTable read_numeric_csv(std::istream& in, const std::string& name) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw FormatError(name + ": missing header row");
  if (line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw FormatError(name + ": row " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(t.header.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(parse_cell(c));
      } catch (const FormatError& e) {
        throw FormatError(name + ": row " + std::to_string(lineno) + ": " + e.what());
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw FormatError(name + ": no data rows");
  return t;
}

inline CsvTable read_numeric_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_numeric_csv(in, path);
}

}  // namespace noisysgd::cli
