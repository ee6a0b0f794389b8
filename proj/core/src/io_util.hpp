#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hoa::detail {

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

std::vector<std::string> split(std::string_view line, char delimiter);
std::string_view trim(std::string_view s);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

/// Shortest round-trippable decimal form for a double.
std::string format_double(double value);

}  // namespace hoa::detail
