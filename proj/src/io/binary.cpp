#include "reveal/io/binary.hpp"

#include "reveal/error.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fcntl.h>
#include <unistd.h>

namespace reveal::io {
namespace {

constexpr std::size_t kMagicLen = 8;

template <typename T>
T to_le(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        auto* p = reinterpret_cast<std::uint8_t*>(&v);
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(p[i], p[sizeof(T) - 1 - i]);
        }
    }
    return v;
}

std::string padded_magic(std::string_view magic)
{
    std::string m(magic.substr(0, kMagicLen));
    m.resize(kMagicLen, '\0');
    return m;
}

} // namespace

BinaryWriter::BinaryWriter(std::string_view magic, std::uint32_t version)
{
    const std::string m = padded_magic(magic);
    raw(m.data(), m.size());
    u32(version);
}

void BinaryWriter::raw(const void* p, std::size_t n)
{
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
}

void BinaryWriter::u32(std::uint32_t v)
{
    v = to_le(v);
    raw(&v, sizeof v);
}

void BinaryWriter::u64(std::uint64_t v)
{
    v = to_le(v);
    raw(&v, sizeof v);
}

void BinaryWriter::i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s)
{
    u64(s.size());
    raw(s.data(), s.size());
}

void BinaryWriter::f64s(std::span<const double> v)
{
    u64(v.size());
    for (double d : v) {
        f64(d);
    }
}

void BinaryWriter::u64s(std::span<const std::uint64_t> v)
{
    u64(v.size());
    for (auto d : v) {
        u64(d);
    }
}

void BinaryWriter::save_atomic(const std::filesystem::path& path) const { write_file_atomic(path, buf_); }

BinaryReader::BinaryReader(std::vector<std::uint8_t> bytes, std::string_view magic) : buf_(std::move(bytes))
{
    const std::string want = padded_magic(magic);
    require(buf_.size() >= kMagicLen + 4 && std::memcmp(buf_.data(), want.data(), kMagicLen) == 0,
            ErrorCode::Format, "bad file magic, expected " + std::string(magic));
    pos_ = kMagicLen;
    version_ = u32();
}

BinaryReader BinaryReader::open(const std::filesystem::path& path, std::string_view magic)
{
    return BinaryReader(read_file(path), magic);
}

void BinaryReader::raw(void* p, std::size_t n)
{
    require(pos_ + n <= buf_.size(), ErrorCode::Format, "truncated binary file");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
}

std::uint32_t BinaryReader::u32()
{
    std::uint32_t v;
    raw(&v, sizeof v);
    return to_le(v);
}

std::uint64_t BinaryReader::u64()
{
    std::uint64_t v;
    raw(&v, sizeof v);
    return to_le(v);
}

std::int64_t BinaryReader::i64() { return static_cast<std::int64_t>(u64()); }

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str()
{
    const std::uint64_t n = u64();
    require(n <= buf_.size() - pos_, ErrorCode::Format, "truncated string");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
}

std::vector<double> BinaryReader::f64s()
{
    const std::uint64_t n = u64();
    require(n <= (buf_.size() - pos_) / 8, ErrorCode::Format, "truncated array");
    std::vector<double> v(n);
    for (auto& d : v) {
        d = f64();
    }
    return v;
}

std::vector<std::uint64_t> BinaryReader::u64s()
{
    const std::uint64_t n = u64();
    require(n <= (buf_.size() - pos_) / 8, ErrorCode::Format, "truncated array");
    std::vector<std::uint64_t> v(n);
    for (auto& d : v) {
        d = u64();
    }
    return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    require(!std::filesystem::is_directory(path), ErrorCode::Io, path.string() + " is a directory");
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    const std::filesystem::path tmp = path.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    require(fd >= 0, ErrorCode::Io, "cannot write " + tmp.string());
    std::size_t off = 0;
    while (off < bytes.size()) {
        const ssize_t n = ::write(fd, bytes.data() + off, bytes.size() - off);
        if (n <= 0) {
            ::close(fd);
            fail(ErrorCode::Io, "write failed: " + tmp.string());
        }
        off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    std::filesystem::rename(tmp, path);
}

} // namespace reveal::io
