#pragma once

#include <filesystem>
#include <string>

namespace gdce {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Resolve `p` against `base` unless it is already absolute.
std::filesystem::path resolve_path(const std::filesystem::path& base,
                                   const std::filesystem::path& p);

}  // namespace gdce
