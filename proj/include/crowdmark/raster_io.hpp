#pragma once

#include "crowdmark/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace crowdmark {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // row-major
};

/// Reads an 8-bit single-channel PNG; anything else is rejected.
[[nodiscard]] GrayImage read_png_gray8(const std::filesystem::path& path);
void write_png_gray8(const std::filesystem::path& path, const GrayImage& image);

/// Sidecar JSON object {"a","b","c","d","e","f"}.
[[nodiscard]] GeoTransform read_geotransform(const std::filesystem::path& path);
void write_geotransform(const std::filesystem::path& path, const GeoTransform& gt);

/// Probability raster with value = pixel / 255.
[[nodiscard]] ProbRaster load_prob_raster(const std::filesystem::path& png_path,
                                          const std::filesystem::path& geotransform_path);

} // namespace crowdmark
