#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cadmus {

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
// Throws IoError when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

// Whole-file helpers; throw IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace cadmus
