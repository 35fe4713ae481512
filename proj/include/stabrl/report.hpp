#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace stabrl {

// Shortest round-trip is not the goal: always 17 significant digits.
std::string format_number(double v);

/// Comma-separated table, header first, LF line endings. Throws InputError
/// when the file cannot be opened.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Static SVG line chart. With log_y the non-positive samples are skipped.
void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::vector<PlotSeries>& series,
                     bool log_y = false);

}  // namespace stabrl
