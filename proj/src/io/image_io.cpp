#include "reveal/io/image_io.hpp"

#include "reveal/error.hpp"
#include "reveal/io/binary.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first
#include <cstdio>
#include <jpeglib.h>
#include <setjmp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

namespace reveal::io {
namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

GrayRaster decode_png_bytes(std::span<const std::uint8_t> bytes)
{
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        fail(ErrorCode::Format, std::string("png: ") + img.message);
    }
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        fail(ErrorCode::Format, std::string("png: ") + img.message);
    }
    GrayRaster r{static_cast<int>(img.width), static_cast<int>(img.height), {}};
    const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
    r.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.values[i] = color ? (kLumaR * buf[3 * i] + kLumaG * buf[3 * i + 1] + kLumaB * buf[3 * i + 2]) / 255.0
                            : buf[i] / 255.0;
    }
    return r;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo)
{
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    longjmp(err->jump, 1);
}

GrayRaster decode_jpeg_bytes(std::span<const std::uint8_t> bytes)
{
    jpeg_decompress_struct cinfo{};
    JpegErrorMgr jerr{};
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    GrayRaster r;
    std::vector<std::uint8_t> row;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        fail(ErrorCode::Format, std::string("jpeg: ") + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    const bool color = cinfo.num_components != 1;
    cinfo.out_color_space = color ? JCS_RGB : JCS_GRAYSCALE;
    jpeg_start_decompress(&cinfo);
    r.width = static_cast<int>(cinfo.output_width);
    r.height = static_cast<int>(cinfo.output_height);
    const int comps = cinfo.output_components;
    r.values.resize(static_cast<std::size_t>(r.width) * r.height);
    row.resize(static_cast<std::size_t>(r.width) * comps);
    while (cinfo.output_scanline < cinfo.output_height) {
        const std::size_t y = cinfo.output_scanline;
        JSAMPROW ptr = row.data();
        jpeg_read_scanlines(&cinfo, &ptr, 1);
        for (int x = 0; x < r.width; ++x) {
            const std::uint8_t* p = row.data() + static_cast<std::size_t>(x) * comps;
            r.values[y * r.width + x] =
                comps == 1 ? p[0] / 255.0 : (kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2]) / 255.0;
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return r;
}

// P2 (ASCII) and P5 (binary, 8- or 16-bit big-endian) graymaps.
GrayRaster decode_pgm_bytes(std::span<const std::uint8_t> bytes)
{
    std::size_t pos = 2;
    const bool ascii = bytes[1] == '2';
    auto next_token = [&]() -> long {
        for (;;) {
            while (pos < bytes.size() && std::isspace(bytes[pos])) {
                ++pos;
            }
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
                continue;
            }
            break;
        }
        require(pos < bytes.size() && std::isdigit(bytes[pos]), ErrorCode::Format, "pgm: bad header");
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
        }
        return v;
    };
    GrayRaster r;
    r.width = static_cast<int>(next_token());
    r.height = static_cast<int>(next_token());
    const long maxval = next_token();
    require(r.width > 0 && r.height > 0 && maxval > 0 && maxval < 65536, ErrorCode::Format,
            "pgm: bad header values");
    const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
    r.values.resize(n);
    if (ascii) {
        for (std::size_t i = 0; i < n; ++i) {
            r.values[i] = static_cast<double>(next_token()) / maxval;
        }
        return r;
    }
    ++pos; // single whitespace after maxval
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    require(bytes.size() >= pos + n * bpp, ErrorCode::Format, "pgm: truncated data");
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* p = bytes.data() + pos + i * bpp;
        const long v = bpp == 1 ? p[0] : (p[0] << 8) | p[1];
        r.values[i] = static_cast<double>(v) / maxval;
    }
    return r;
}

// Overlap weights of output cells [o*scale, (o+1)*scale) against unit input cells.
struct AxisWeights {
    std::vector<int> first;
    std::vector<std::vector<double>> w;
};

AxisWeights area_weights(int in, int out)
{
    AxisWeights aw;
    aw.first.resize(out);
    aw.w.resize(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        const double lo = o * scale;
        const double hi = (o + 1) * scale;
        const int i0 = static_cast<int>(std::floor(lo));
        const int i1 = std::min(in, static_cast<int>(std::ceil(hi)));
        aw.first[o] = i0;
        for (int i = i0; i < i1; ++i) {
            const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
            aw.w[o].push_back(overlap / scale);
        }
    }
    return aw;
}

} // namespace

GrayRaster decode_raster(std::span<const std::uint8_t> bytes)
{
    require(bytes.size() >= 4, ErrorCode::Format, "image file too short");
    if (bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
        return decode_png_bytes(bytes);
    }
    if (bytes[0] == 0xFF && bytes[1] == 0xD8) {
        return decode_jpeg_bytes(bytes);
    }
    if (bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5')) {
        return decode_pgm_bytes(bytes);
    }
    fail(ErrorCode::Format, "unrecognized image format");
}

GrayRaster read_raster(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    return decode_raster(bytes);
}

std::vector<double> resample_area(const GrayRaster& raster, int side)
{
    require(raster.width > 0 && raster.height > 0 && side > 0, ErrorCode::InvalidInput,
            "resample: empty raster");
    const AxisWeights wx = area_weights(raster.width, side);
    const AxisWeights wy = area_weights(raster.height, side);
    // Horizontal pass into height x side, then vertical pass.
    std::vector<double> tmp(static_cast<std::size_t>(raster.height) * side, 0.0);
    for (int y = 0; y < raster.height; ++y) {
        const double* row = raster.values.data() + static_cast<std::size_t>(y) * raster.width;
        for (int o = 0; o < side; ++o) {
            double acc = 0.0;
            for (std::size_t k = 0; k < wx.w[o].size(); ++k) {
                acc += wx.w[o][k] * row[wx.first[o] + static_cast<int>(k)];
            }
            tmp[static_cast<std::size_t>(y) * side + o] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(side) * side, 0.0);
    for (int o = 0; o < side; ++o) {
        for (std::size_t k = 0; k < wy.w[o].size(); ++k) {
            const double wk = wy.w[o][k];
            const double* src = tmp.data() + static_cast<std::size_t>(wy.first[o] + static_cast<int>(k)) * side;
            double* dst = out.data() + static_cast<std::size_t>(o) * side;
            for (int x = 0; x < side; ++x) {
                dst[x] += wk * src[x];
            }
        }
    }
    for (double& v : out) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

GrayRaster to_raster(const WorkingImage& image)
{
    return GrayRaster{image.side(), image.side(), image.data()};
}

std::vector<std::uint8_t> encode_png(const GrayRaster& raster)
{
    const std::size_t n = static_cast<std::size_t>(raster.width) * raster.height;
    require(raster.values.size() == n && n > 0, ErrorCode::InvalidInput, "png: bad raster");
    std::vector<std::uint8_t> px(n);
    for (std::size_t i = 0; i < n; ++i) {
        px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(raster.values[i], 0.0, 1.0) * 255.0));
    }
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(raster.width);
    img.height = static_cast<png_uint_32>(raster.height);
    img.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, px.data(), 0, nullptr)) {
        fail(ErrorCode::Io, std::string("png: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, px.data(), 0, nullptr)) {
        fail(ErrorCode::Io, std::string("png: ") + img.message);
    }
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> encode_png(const WorkingImage& image) { return encode_png(to_raster(image)); }

void write_png(const std::filesystem::path& path, const GrayRaster& raster)
{
    const auto bytes = encode_png(raster);
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::Io, "write failed: " + path.string());
}

void write_png(const std::filesystem::path& path, const WorkingImage& image)
{
    write_png(path, to_raster(image));
}

WorkingImage read_working_image(const std::filesystem::path& path, int side)
{
    GrayRaster r = read_raster(path);
    if (side <= 0) {
        require(r.width == r.height, ErrorCode::InvalidInput, "image is not square: " + path.string());
        return WorkingImage(r.width, std::move(r.values), path.filename().string());
    }
    if (r.width == side && r.height == side) {
        return WorkingImage(side, std::move(r.values), path.filename().string());
    }
    return WorkingImage(side, resample_area(r, side), path.filename().string());
}

} // namespace reveal::io
