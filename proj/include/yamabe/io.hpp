#pragma once

#include <filesystem>
#include <string>

namespace yamabe {

// Writes `content` to a sibling temporary file and renames it over `path`,
// so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

// %.17g
std::string format_double(double x);

}  // namespace yamabe
