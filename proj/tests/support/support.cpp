#include "support.hpp"

#include "crowdmark/raster_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace testsupport {

namespace fs = std::filesystem;

fs::path scratch_dir(std::string_view name) {
    const fs::path dir = fs::path(CROWDMARK_TEST_SCRATCH) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, std::string_view text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

crowdmark::ProbRaster raster_with(std::size_t width, std::size_t height, const std::vector<PixelRect>& rects,
                                  double value, double background) {
    std::vector<double> values(width * height, background);
    for (const PixelRect& r : rects) {
        for (std::size_t row = r.row0; row < r.row1; ++row) {
            for (std::size_t col = r.col0; col < r.col1; ++col) {
                values[row * width + col] = value;
            }
        }
    }
    return crowdmark::ProbRaster(width, height, std::move(values));
}

void write_raster_files(const fs::path& png, const fs::path& gt_json, std::size_t width, std::size_t height,
                        const std::vector<std::uint8_t>& levels, const crowdmark::GeoTransform& gt) {
    fs::create_directories(png.parent_path());
    crowdmark::write_png_gray8(png, crowdmark::GrayImage{width, height, levels});
    crowdmark::write_geotransform(gt_json, gt);
}

} // namespace testsupport
