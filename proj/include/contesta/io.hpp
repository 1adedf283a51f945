#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace contesta::io {

std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over the target so a
// failed write never leaves a partial file behind.
void atomic_write_text(const std::filesystem::path& path, std::string_view content);

// Minimal CSV table: unquoted comma-separated fields, first line is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ParseError when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text, const std::string& source_name);
CsvTable read_csv(const std::filesystem::path& path);

double parse_double(std::string_view field, const std::string& context);
long long parse_int(std::string_view field, const std::string& context);

// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace contesta::io
