#pragma once

// CSV and SVG writers. Numbers are printed with a fixed format so that the
// same run always produces the same bytes.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace riccati_geo::cli {

std::string format_number(double v);

class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, std::vector<std::string> header);
  void row(const std::vector<double>& values);
  /// Writes the file; throws std::runtime_error on I/O failure.
  void save() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::string text_;
  std::size_t columns_;
};

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

struct PlotSeries {
  std::string label;
  std::vector<double> y;
};

/// Single-file SVG line plot. Non-finite points (and non-positive ones when
/// log_y is set) break the line.
void write_svg_plot(const std::filesystem::path& path, const std::string& title,
                    const std::vector<double>& x, const std::vector<PlotSeries>& series,
                    bool log_y);

}  // namespace riccati_geo::cli
