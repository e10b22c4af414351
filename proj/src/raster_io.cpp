#include "crowdmark/raster_io.hpp"

#include "crowdmark/errors.hpp"
#include "crowdmark/io.hpp"

#include <json.hpp>
#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

namespace crowdmark {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp; the message is kept for the exception
// thrown once control is back in C++ frames.
thread_local char g_png_message[256];

void png_error_handler(png_structp png, png_const_charp msg) {
    std::snprintf(g_png_message, sizeof(g_png_message), "%s", msg);
    png_longjmp(png, 1);
}
void png_warning_handler(png_structp, png_const_charp) {}

} // namespace

GrayImage read_png_gray8(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw IoError("'" + path.string() + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* png;
        png_infop* info;
        ~Guard() { png_destroy_read_struct(png, info, nullptr); }
    } guard{&png, &info};

    GrayImage img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        throw IoError("'" + path.string() + "': " + g_png_message);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
        throw IoError("'" + path.string() + "' must be an 8-bit single-channel PNG");
    }
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.pixels.resize(img.width * img.height);
    rows.resize(img.height);
    for (std::size_t r = 0; r < img.height; ++r) {
        rows[r] = img.pixels.data() + r * img.width;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    return img;
}

void write_png_gray8(const std::filesystem::path& path, const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height || image.width == 0 || image.height == 0) {
        throw ValidationError("image dimensions do not match pixel count");
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* png;
        png_infop* info;
        ~Guard() { png_destroy_write_struct(png, info); }
    } guard{&png, &info};

    if (setjmp(png_jmpbuf(png))) {
        throw IoError("'" + path.string() + "': " + g_png_message);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < image.height; ++r) {
        png_write_row(png, image.pixels.data() + r * image.width);
    }
    png_write_end(png, nullptr);
}

GeoTransform read_geotransform(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("geotransform '" + path.string() + "': " + e.what());
    }
    GeoTransform gt;
    const auto get = [&](const char* key) {
        if (!j.is_object() || !j.contains(key) || !j[key].is_number()) {
            throw ValidationError("geotransform '" + path.string() + "' lacks numeric field '" + key + "'");
        }
        return j[key].get<double>();
    };
    gt.a = get("a");
    gt.b = get("b");
    gt.c = get("c");
    gt.d = get("d");
    gt.e = get("e");
    gt.f = get("f");
    return gt;
}

void write_geotransform(const std::filesystem::path& path, const GeoTransform& gt) {
    const nlohmann::json j{{"a", gt.a}, {"b", gt.b}, {"c", gt.c}, {"d", gt.d}, {"e", gt.e}, {"f", gt.f}};
    io::write_file_atomic(path, j.dump(2) + "\n");
}

ProbRaster load_prob_raster(const std::filesystem::path& png_path, const std::filesystem::path& geotransform_path) {
    const GrayImage img = read_png_gray8(png_path);
    const GeoTransform gt = read_geotransform(geotransform_path);
    std::vector<double> values(img.pixels.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = img.pixels[i] / 255.0;
    }
    return ProbRaster(img.width, img.height, std::move(values), gt);
}

} // namespace crowdmark
