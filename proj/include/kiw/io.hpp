/// @file io.hpp
/// @brief Round-trip number formatting and small file helpers shared by reports and the CLI.
#pragma once

#include <string>
#include <vector>

namespace kiw {

/// %.17g formatting of a double.
std::string fmt17(double v);

/// CSV line from already formatted cells (no quoting; cells must not contain commas).
std::string csv_line(const std::vector<std::string>& cells);

/// Write text to a file, throwing IoError on failure.
void write_text_file(const std::string& path, const std::string& text);

/// Read a whole file, throwing IoError on failure.
std::string read_text_file(const std::string& path);

}  // namespace kiw
