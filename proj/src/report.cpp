#include "stabrl/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "stabrl/errors.hpp"

namespace stabrl {

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()) {
  if (!out_) throw IoError("cannot write '" + path.string() + "'");
  row(header);
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_number(v));
  row(cells);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw InputError("csv: row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::vector<PlotSeries>& series,
                     bool log_y) {
  constexpr double kW = 720, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  static const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  auto ty = [log_y](double y) { return log_y ? std::log10(y) : y; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && !(s.y[i] > 0.0)) continue;
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); };
  auto py = [&](double y) { return kH - kBottom - (ty(y) - y0) / (y1 - y0) * (kH - kTop - kBottom); };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)"
                     "\n", kW, kH);
  out << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)" "\n", kW, kH);
  out << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>)" "\n",
                     kW / 2, title);
  out << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>)" "\n",
                     kLeft, kTop, kW - kLeft - kRight, kH - kTop - kBottom);
  out << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)" "\n", kW / 2, kH - 12,
                     x_label);
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    out << fmt::format(R"(<text x="{:.1f}" y="{}" text-anchor="middle">{:.3g}</text>)" "\n", px(fx),
                       kH - kBottom + 16, fx);
    const double ypix = kH - kBottom - (fy - y0) / (y1 - y0) * (kH - kTop - kBottom);
    out << fmt::format(R"(<text x="{}" y="{:.1f}" text-anchor="end">{}</text>)" "\n", kLeft - 6,
                       ypix + 4, log_y ? fmt::format("1e{:.1f}", fy) : fmt::format("{:.3g}", fy));
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    out << fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="1.5" points=")", color);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((log_y && !(s.y[i] > 0.0)) || !std::isfinite(s.y[i])) continue;
      out << fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
    }
    out << "\"/>\n";
    out << fmt::format(R"(<text x="{}" y="{}" fill="{}">{}</text>)" "\n", kLeft + 10,
                       kTop + 16 + 16 * k, color, s.label);
  }
  out << "</svg>\n";
}

}  // namespace stabrl
