#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace delichain {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames it over `path`, so readers never
// observe a partial artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace delichain
