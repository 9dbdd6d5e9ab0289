#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tfw {

// RFC-4180 CSV writer with optional '#'-prefixed provenance header lines.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void comment(const std::string& line);
  void row(const std::vector<std::string>& cells);
  static std::string quote(const std::string& cell);

 private:
  void* file_;
};

std::string format_double(double v);

// FNV-1a over the raw bytes; used for config provenance hashes.
std::uint64_t fnv1a(const std::string& data);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Minimal static SVG line chart (one polyline per series) for offline
// inspection of decay and variance plots.
struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<SvgSeries>& series, bool log_y);

}  // namespace tfw
