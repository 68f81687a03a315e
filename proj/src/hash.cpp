#include "reveal/hash.hpp"

#include "reveal/error.hpp"
#include "reveal/io/binary.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <vector>

namespace reveal {

std::string sha256_hex(std::span<const std::uint8_t> bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    std::string hex(2 * static_cast<std::size_t>(len), '0');
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(hex.data() + 2 * i, 3, "%02x", md[i]);
    }
    return hex;
}

std::string sha256_hex(std::span<const double> values)
{
    std::vector<std::uint8_t> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(values[i]);
        for (int b = 0; b < 8; ++b) {
            bytes[8 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
        }
    }
    return sha256_hex(bytes);
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(io::read_file(path)); }

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
    require(text.size() % 4 == 0, ErrorCode::Format, "base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * (text.size() / 4) + 1);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    require(n >= 0, ErrorCode::Format, "malformed base64");
    // EVP_DecodeBlock counts padding bytes as output.
    std::size_t len = static_cast<std::size_t>(n);
    for (std::size_t i = text.size(); i > 0 && text[i - 1] == '=' && len > 0; --i) {
        --len;
    }
    out.resize(len);
    return out;
}

} // namespace reveal
