#include "liqport/experiments/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace liqport::experiments {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
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

std::string fixed(double x, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// Round step (1, 2 or 5 times a power of ten) giving about `target` ticks.
double tick_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

}  // namespace

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double Table::number(std::size_t row, const std::string& name) const {
  const std::string& s = rows.at(row).at(column(name));
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string csv_text(const Table& t, const std::vector<std::string>& comments) {
  std::string out;
  for (const std::string& c : comments) out += "# " + c + "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size()) throw std::invalid_argument("row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  return out;
}

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      t.columns = split(line);
      header = false;
    } else {
      t.rows.push_back(split(line));
      if (t.rows.back().size() != t.columns.size()) throw std::invalid_argument("ragged CSV row: " + line);
    }
  }
  if (header) throw std::invalid_argument("CSV has no header");
  return t;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string render_svg(const LinePlot& p) {
  constexpr double width = 640, height = 420, left = 70, right = 150, top = 40, bottom = 55;
  const double pw = width - left - right, ph = height - top - bottom;

  std::vector<Series> shown = p.series;
  for (Series& s : shown) {
    Series kept{s.label, {}, {}};
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double y = s.y[i];
      if (p.log_y) {
        if (!(y > 0.0)) continue;
        y = std::log10(y);
      }
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      kept.x.push_back(s.x[i]);
      kept.y.push_back(y);
    }
    s = std::move(kept);
  }
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : shown)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5 * std::max(std::abs(y0), 1e-3), y1 += 0.5 * std::max(std::abs(y1), 1e-3);
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const auto X = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  const auto Y = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(p.title) << "</text>\n";
  o << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(pw) << "\" height=\""
    << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  const double xs = tick_step(x1 - x0, 6), ys = tick_step(y1 - y0, 6);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs) {
    o << "<line x1=\"" << fixed(X(t)) << "\" y1=\"" << fixed(top + ph) << "\" x2=\"" << fixed(X(t)) << "\" y2=\""
      << fixed(top + ph + 5) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << fixed(X(t)) << "\" y=\"" << fixed(top + ph + 18) << "\" text-anchor=\"middle\">"
      << format_number(std::abs(t) < 1e-12 * xs ? 0.0 : t) << "</text>\n";
  }
  for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys) {
    const double v = std::abs(t) < 1e-12 * ys ? 0.0 : t;
    o << "<line x1=\"" << fixed(left - 5) << "\" y1=\"" << fixed(Y(t)) << "\" x2=\"" << fixed(left) << "\" y2=\""
      << fixed(Y(t)) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << fixed(left - 8) << "\" y=\"" << fixed(Y(t) + 4) << "\" text-anchor=\"end\">"
      << (p.log_y ? "1e" + format_number(v) : format_number(v)) << "</text>\n";
  }
  o << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(height - 12) << "\" text-anchor=\"middle\">"
    << escape(p.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << fixed(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << fixed(top + ph / 2) << ")\">" << escape(p.y_label) << "</text>\n";

  for (std::size_t k = 0; k < shown.size(); ++k) {
    const Series& s = shown[k];
    const char* color = kColors[k % std::size(kColors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << fixed(X(s.x[i])) << ',' << fixed(Y(s.y[i]));
    o << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(k);
    o << "<line x1=\"" << fixed(left + pw + 12) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(left + pw + 36)
      << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << fixed(left + pw + 42) << "\" y=\"" << fixed(ly + 4) << "\">" << escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

LinePlot plot_from_table(const Table& t, const std::string& x, const std::string& y, const std::string& group,
                         const std::string& title) {
  LinePlot p;
  p.title = title;
  p.x_label = x;
  p.y_label = y;
  const std::size_t xi = t.column(x), yi = t.column(y);
  const std::size_t gi = group.empty() ? 0 : t.column(group);
  for (const auto& row : t.rows) {
    const std::string label = group.empty() ? y : group + " = " + row[gi];
    auto it = std::find_if(p.series.begin(), p.series.end(), [&](const Series& s) { return s.label == label; });
    if (it == p.series.end()) {
      p.series.push_back({label, {}, {}});
      it = p.series.end() - 1;
    }
    it->x.push_back(row[xi] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(row[xi]));
    it->y.push_back(row[yi] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(row[yi]));
  }
  return p;
}

}  // namespace liqport::experiments
