#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ocan {

// Whole-file read; IoError if the file cannot be opened.
std::string read_file(const std::string& path);

// Writes to "<path>.tmp.<pid>" then renames over `path`, so readers never
// see a partial file.
void write_file_atomic(const std::string& path, std::string_view content);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// Strict parse of a whole cell (surrounding spaces and quotes allowed).
bool parse_double(std::string_view cell, double& out);

// Comma split. Cells are trimmed and one pair of surrounding quotes is
// removed; quoted commas are not supported.
std::vector<std::string_view> split_csv(std::string_view line);

}  // namespace ocan
