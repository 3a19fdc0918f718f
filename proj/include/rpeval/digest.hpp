#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace rpeval {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Lowercase hex SHA-256 of a file's bytes. Throws DataError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace rpeval
