#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace liqport::experiments {

/// Rectangular table of already formatted cells.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Index of a named column; throws std::out_of_range when absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Shortest-form "%.12g"; NaN prints as "nan".
std::string format_number(double x);

/// Comment lines (each prefixed "# "), header, rows.
std::string csv_text(const Table& t, const std::vector<std::string>& comments);
/// Skips "#" lines; the first remaining line is the header.
Table parse_csv(const std::string& text);

void write_text(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Plot log10(y); non-positive values are dropped.
  bool log_y = false;
};

/// Self-contained SVG with axes, ticks, one polyline per series and a legend.
std::string render_svg(const LinePlot& p);

/// One series per distinct value of `group` (all rows in one series when
/// `group` is empty), in order of first appearance.
LinePlot plot_from_table(const Table& t, const std::string& x, const std::string& y, const std::string& group,
                         const std::string& title);

}  // namespace liqport::experiments
