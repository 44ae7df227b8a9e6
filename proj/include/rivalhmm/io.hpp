#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rivalhmm {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

/// Strict full-string parse; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);

std::string read_file(const std::string& path);

/// Writes to a temporary sibling then renames, so the target is either the
/// complete new content or untouched.
void write_file_atomic(const std::string& path, const std::string& content);

/// Header plus rows of raw string cells. Double-quoted cells are unquoted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// -1 when absent.
  int column_index(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

std::string join_csv_row(const std::vector<std::string>& cells);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fingerprint(std::string_view bytes);

}  // namespace rivalhmm
