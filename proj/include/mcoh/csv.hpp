#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mcoh::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Splits one line on commas, trimming surrounding whitespace and a trailing
// '\r'. No quoting support; fields must not contain commas.
std::vector<std::string> split_line(const std::string& line);

// Reads a whole CSV file; first non-empty line is the header. Blank lines
// are skipped. Throws data_error on unreadable files or ragged rows.
Table read_file(const std::filesystem::path& path);

// Shortest representation that round-trips a double exactly.
std::string format_double(double value);

double parse_double(const std::string& field, const std::string& context);
long parse_long(const std::string& field, const std::string& context);

}  // namespace mcoh::csv
