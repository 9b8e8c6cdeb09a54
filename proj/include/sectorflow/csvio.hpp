#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sectorflow::csvio {

// Shortest representation that parses back to the identical double.
std::string fmt_double(double v);

// Strict numeric parsing; throws std::invalid_argument naming the token.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

// Split one CSV line on commas (no quoting; formats here never need it).
std::vector<std::string_view> split_csv(std::string_view line);

// Read a whole text file into lines, tolerating trailing \r and a missing
// final newline. Throws std::runtime_error if the file cannot be opened.
std::vector<std::string> read_lines(const std::string& path);

}  // namespace sectorflow::csvio
