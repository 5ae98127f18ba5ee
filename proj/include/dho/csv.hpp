#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dho {

/// Scientific notation with `precision` digits after the point, locale-free.
std::string format_number(double v, int precision);

/// Shortest text that reads back to the same double.
std::string format_shortest(double v);

/// Comma-separated output with a header row and LF line endings.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, int precision);

  void header(const std::vector<std::string>& names);
  void row(std::span<const double> values);

 private:
  std::ostream& out_;
  int precision_;
  std::size_t columns_ = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of the named column; throws std::out_of_range when absent.
  std::size_t column(std::string_view name) const;
};

/// Reads what CsvWriter produces. Throws std::runtime_error on malformed input.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

}  // namespace dho
