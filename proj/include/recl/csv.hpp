#pragma once

#include <string>
#include <vector>

namespace recl::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a named column, -1 if absent.
  int column(const std::string& name) const;
};

/// Parses comma-separated text with a mandatory header row. No quoting:
/// the schemas in this toolkit never embed commas in fields. Blank lines
/// are skipped; a row with the wrong arity is an InputError.
Table parse_csv(const std::string& text);

Table read_csv_file(const std::string& path);

/// Shortest round-trip decimal representation, locale independent.
std::string format_double(double x);

double parse_double(const std::string& field, const std::string& context);

/// Writes text to `path` atomically (temp file in the same directory,
/// then rename).
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace recl::csv
