#ifndef LATTICEWALK_CSV_HPP_
#define LATTICEWALK_CSV_HPP_

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace latticewalk {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest representation that parses back to the same double. Locale independent.
std::string format_double(double value);

/// Strict parse of a whole string as a double; throws std::invalid_argument.
double parse_double(std::string_view text);

/// Buffered CSV writer with a header row. Cells are written verbatim.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& cell(std::string_view text);
  CsvWriter& cell(double value);
  CsvWriter& cell(long long value);
  CsvWriter& cell(unsigned long long value);
  CsvWriter& cell(std::size_t value) { return cell(static_cast<unsigned long long>(value)); }
  CsvWriter& cell(int value) { return cell(static_cast<long long>(value)); }
  CsvWriter& empty() { return cell(std::string_view{}); }
  void end_row();

  /// Flushes and throws IoError if any write failed.
  void close();

  const std::filesystem::path& path() const { return path_; }

 private:
  void write_header(const std::vector<std::string>& header);

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
  std::size_t in_row_ = 0;
};

/// Whole CSV file with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws IoError naming the column if absent.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace latticewalk

#endif  // LATTICEWALK_CSV_HPP_
