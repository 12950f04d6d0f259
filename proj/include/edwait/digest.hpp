#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace edwait {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's contents. Throws std::runtime_error when
/// the file cannot be read.
std::string sha256_file(const std::filesystem::path& file);

}  // namespace edwait
