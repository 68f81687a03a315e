#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reveal {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::span<const double> values);
std::string sha256_file(const std::filesystem::path& path);

/// Standard base64 with padding.
std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws Format on malformed input. Whitespace is not accepted.
std::vector<std::uint8_t> base64_decode(std::string_view text);

} // namespace reveal
