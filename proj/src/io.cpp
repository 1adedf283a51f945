#include "contesta/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include <fmt/format.h>

#include "contesta/error.hpp"
#include "contesta/rng.hpp"

namespace contesta::io {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void atomic_write_text(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  static thread_local Rng suffix_rng(mix64(reinterpret_cast<std::uintptr_t>(&content)));
  fs::path tmp = path;
  tmp += fmt::format(".tmp-{:016x}", suffix_rng.next());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(ErrorCode::IoError, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::IoError, "cannot rename onto " + path.string());
  }
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail(ErrorCode::ParseError, fmt::format("missing CSV column '{}'", name));
}

bool CsvTable::has_column(std::string_view name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

CsvTable parse_csv(std::string_view text, const std::string& source_name) {
  CsvTable table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size())
      fail(ErrorCode::ParseError,
           fmt::format("{}:{}: expected {} fields, got {}", source_name, line_no,
                       table.header.size(), fields.size()));
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) fail(ErrorCode::ParseError, source_name + ": empty CSV");
  return table;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_text(path), path.string()); }

double parse_double(std::string_view field, const std::string& context) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    fail(ErrorCode::ParseError, fmt::format("{}: not a number: '{}'", context, field));
  return value;
}

long long parse_int(std::string_view field, const std::string& context) {
  long long value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    fail(ErrorCode::ParseError, fmt::format("{}: not an integer: '{}'", context, field));
  return value;
}

std::string format_double(double value) { return fmt::format("{}", value); }

}  // namespace contesta::io
