#pragma once

#include "crowdmark/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace testsupport {

/// Fresh, empty directory under the build tree's scratch area.
std::filesystem::path scratch_dir(std::string_view name);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

struct PixelRect {
    std::size_t col0, row0, col1, row1; // half-open pixel ranges
};

/// Raster of `background` with each rectangle filled with `value`.
crowdmark::ProbRaster raster_with(std::size_t width, std::size_t height, const std::vector<PixelRect>& rects,
                                  double value = 1.0, double background = 0.0);

/// Writes an 8-bit PNG plus geotransform sidecar from 0..255 levels.
void write_raster_files(const std::filesystem::path& png, const std::filesystem::path& gt_json, std::size_t width,
                        std::size_t height, const std::vector<std::uint8_t>& levels,
                        const crowdmark::GeoTransform& gt = {});

} // namespace testsupport
