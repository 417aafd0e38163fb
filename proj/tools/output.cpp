#include "output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace riccati_geo::cli {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CsvWriter::CsvWriter(std::filesystem::path path, std::vector<std::string> header)
    : path_(std::move(path)), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw std::logic_error("csv row has the wrong number of columns");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) text_ += ',';
    text_ += format_number(values[i]);
  }
  text_ += '\n';
}

void CsvWriter::save() const {
  std::ofstream out(path_, std::ios::binary);
  out << text_;
  if (!out) throw std::runtime_error("cannot write " + path_.string());
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_svg_plot(const std::filesystem::path& path, const std::string& title,
                    const std::vector<double>& x, const std::vector<PlotSeries>& series,
                    bool log_y) {
  constexpr double width = 720, height = 440, left = 70, right = 20, top = 40, bottom = 50;
  auto usable = [&](double v) { return std::isfinite(v) && (!log_y || v > 0.0); };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (double v : x) {
    x_lo = std::min(x_lo, v);
    x_hi = std::max(x_hi, v);
  }
  for (const auto& s : series) {
    for (double v : s.y) {
      if (!usable(v)) continue;
      y_lo = std::min(y_lo, ty(v));
      y_hi = std::max(y_hi, ty(v));
    }
  }
  if (!(x_hi > x_lo)) x_hi = x_lo + 1.0;
  if (!std::isfinite(y_lo)) y_lo = 0.0, y_hi = 1.0;
  if (!(y_hi > y_lo)) y_hi = y_lo + 1.0;

  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double v) { return left + (v - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double v) { return top + (1.0 - (ty(v) - y_lo) / (y_hi - y_lo)) * ph; };

  std::ofstream out(path, std::ios::binary);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
    const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
    out << "<text x=\"" << format_number(px(xv)) << "\" y=\"" << height - bottom + 18
        << "\" text-anchor=\"middle\">" << format_number(xv) << "</text>\n";
    const double ypix = top + (1.0 - i / 4.0) * ph;
    out << "<text x=\"" << left - 6 << "\" y=\"" << format_number(ypix + 4)
        << "\" text-anchor=\"end\">" << (log_y ? "1e" + format_number(yv) : format_number(yv))
        << "</text>\n";
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">t</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    std::string points;
    auto flush = [&] {
      if (!points.empty()) {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
            << points << "\"/>\n";
        points.clear();
      }
    };
    const auto& y = series[s].y;
    const std::size_t n = std::min(x.size(), y.size());
    // Thin very long series to keep files small.
    const std::size_t stride = std::max<std::size_t>(1, n / 2000);
    for (std::size_t k = 0; k < n; k += stride) {
      if (!usable(y[k])) {
        flush();
        continue;
      }
      points += format_number(px(x[k])) + "," + format_number(py(y[k])) + " ";
    }
    flush();
    out << "<text x=\"" << left + 10 << "\" y=\"" << top + 16 + 16 * s << "\" fill=\"" << color
        << "\">" << escape(series[s].label) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace riccati_geo::cli
