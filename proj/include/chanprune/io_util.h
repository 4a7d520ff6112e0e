#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace chanprune {

// Writes `contents` to a temporary file beside `path`, then renames it over
// `path`. Parent directories are created as needed.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace chanprune
