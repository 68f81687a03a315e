#pragma once

// Little-endian binary containers used for model, checkpoint and chance files.
// Layout: 8-byte magic, u32 format version, then a sequence of typed fields.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reveal::io {

class BinaryWriter {
public:
    BinaryWriter(std::string_view magic, std::uint32_t version);

    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v);
    void f64(double v);
    void str(std::string_view s);
    void f64s(std::span<const double> v);
    void u64s(std::span<const std::uint64_t> v);

    const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }
    /// Writes to a temporary sibling, fsyncs, then renames over `path`.
    void save_atomic(const std::filesystem::path& path) const;

private:
    void raw(const void* p, std::size_t n);
    std::vector<std::uint8_t> buf_;
};

class BinaryReader {
public:
    BinaryReader(std::vector<std::uint8_t> bytes, std::string_view magic);
    static BinaryReader open(const std::filesystem::path& path, std::string_view magic);

    std::uint32_t version() const noexcept { return version_; }

    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64();
    double f64();
    std::string str();
    std::vector<double> f64s();
    std::vector<std::uint64_t> u64s();
    bool at_end() const noexcept { return pos_ == buf_.size(); }

private:
    void raw(void* p, std::size_t n);
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
    std::uint32_t version_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Durable write: temp file + fsync + rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace reveal::io
