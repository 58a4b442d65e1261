#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace repshare {

/// Reads a whole file; IoError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double v);

/// Minimal comma-separated table: first line is the header, no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or -1.
  int column(std::string_view name) const;
  /// Parses every cell of a column as a double; FormatError on bad cells or a missing column.
  std::vector<double> numeric_column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);

}  // namespace repshare
