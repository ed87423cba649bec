#pragma once

#include <string>
#include <string_view>

namespace dapt {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

}  // namespace dapt
