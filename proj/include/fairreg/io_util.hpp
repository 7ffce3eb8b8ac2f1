#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fairreg {

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

std::vector<std::string_view> split(std::string_view line, char sep);

// Strict numeric parses; return false on trailing garbage or overflow.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

}  // namespace fairreg
