#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace crowdmark {

struct Point2D {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2D&, const Point2D&) = default;
};

/// Axis-aligned box with a closed boundary.
struct BBox {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    [[nodiscard]] double width() const noexcept { return max_x - min_x; }
    [[nodiscard]] double height() const noexcept { return max_y - min_y; }
    [[nodiscard]] double area() const noexcept { return width() * height(); }
    [[nodiscard]] bool valid() const noexcept;

    friend bool operator==(const BBox&, const BBox&) = default;
};

using Ring = std::vector<Point2D>;

/// Exterior ring is implicitly closed: the first vertex is not repeated.
struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;

    friend bool operator==(const Polygon&, const Polygon&) = default;
};

/// Affine pixel-to-scene map: x = a*col + b*row + c, y = d*col + e*row + f.
/// Pixel (col, row) covers [col, col+1] x [row, row+1] in pixel space.
struct GeoTransform {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;
    double e = 1.0;
    double f = 0.0;

    [[nodiscard]] Point2D apply(Point2D pixel) const noexcept {
        return {a * pixel.x + b * pixel.y + c, d * pixel.x + e * pixel.y + f};
    }

    static GeoTransform identity() noexcept { return {}; }

    friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

struct ProbRaster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values; // row-major
    GeoTransform transform;

    ProbRaster() = default;
    /// Validates the dimension contract and value range.
    ProbRaster(std::size_t width, std::size_t height, std::vector<double> values,
               GeoTransform transform = {});

    [[nodiscard]] double at(std::size_t col, std::size_t row) const { return values[row * width + col]; }
};

struct BinaryMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> bits; // row-major, 0 or 1

    BinaryMask() = default;
    BinaryMask(std::size_t width, std::size_t height);

    [[nodiscard]] bool at(std::size_t col, std::size_t row) const { return bits[row * width + col] != 0; }
    void set(std::size_t col, std::size_t row, bool v) { bits[row * width + col] = v ? 1 : 0; }
    [[nodiscard]] std::size_t count() const noexcept;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Intersection over union. Degenerate boxes are legal: two coincident
/// degenerate boxes give 1, any other zero-area union gives 0.
[[nodiscard]] double iou(const BBox& a, const BBox& b) noexcept;

[[nodiscard]] bool contains(const BBox& box, Point2D p) noexcept;

/// Euclidean distance from p to the box (0 when inside or on the boundary).
[[nodiscard]] double boundary_distance(const BBox& box, Point2D p) noexcept;

/// Foreground where value >= theta. Throws InvalidParameter unless theta is in [0, 1].
[[nodiscard]] BinaryMask threshold_mask(const ProbRaster& raster, double theta);

/// Outer borders of the 8-connected foreground components, one polygon per
/// component, ordered by each component's first pixel in raster order.
/// Vertices lie on pixel corners, so a component's envelope is exactly its
/// pixel extent. Holes are not traced.
[[nodiscard]] std::vector<Polygon> extract_contours(const BinaryMask& mask);

/// Envelope of the exterior ring after mapping every vertex through `transform`.
[[nodiscard]] BBox polygon_envelope(const Polygon& polygon, const GeoTransform& transform = {});

[[nodiscard]] std::vector<BBox> filter_min_area(std::span<const BBox> boxes, double min_area);

[[nodiscard]] Polygon bbox_polygon(const BBox& box);

} // namespace crowdmark
