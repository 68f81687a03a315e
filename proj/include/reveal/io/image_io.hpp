#pragma once

#include "reveal/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace reveal::io {

/// Decoded grayscale raster with values in [0,1]; any aspect ratio.
struct GrayRaster {
    int width = 0;
    int height = 0;
    std::vector<double> values; // row-major
};

/// Reads PNG, JPEG or binary/ASCII PGM (detected from the leading bytes).
/// Color input is converted with luma weights 0.299/0.587/0.114.
GrayRaster read_raster(const std::filesystem::path& path);
GrayRaster decode_raster(std::span<const std::uint8_t> bytes);

/// Area-averaging resample onto a side x side grid.
std::vector<double> resample_area(const GrayRaster& raster, int side);

GrayRaster to_raster(const WorkingImage& image);

/// 8-bit grayscale PNG; values are clipped to [0,1] and rounded.
std::vector<std::uint8_t> encode_png(const GrayRaster& raster);
std::vector<std::uint8_t> encode_png(const WorkingImage& image);
void write_png(const std::filesystem::path& path, const GrayRaster& raster);
void write_png(const std::filesystem::path& path, const WorkingImage& image);

/// Reads a square image file as a WorkingImage at its native size, or resampled to `side`.
WorkingImage read_working_image(const std::filesystem::path& path, int side = 0);

} // namespace reveal::io
