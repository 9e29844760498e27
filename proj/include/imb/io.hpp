#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace imb {

// Writes to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

}  // namespace imb
