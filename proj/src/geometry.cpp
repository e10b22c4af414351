#include "crowdmark/geometry.hpp"

#include "crowdmark/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace crowdmark {

bool BBox::valid() const noexcept {
    return std::isfinite(min_x) && std::isfinite(min_y) && std::isfinite(max_x) &&
           std::isfinite(max_y) && min_x <= max_x && min_y <= max_y;
}

ProbRaster::ProbRaster(std::size_t w, std::size_t h, std::vector<double> v, GeoTransform gt)
    : width(w), height(h), values(std::move(v)), transform(gt) {
    if (values.size() != width * height) {
        throw ValidationError("raster has " + std::to_string(values.size()) + " values, expected " +
                              std::to_string(width * height));
    }
    for (double p : values) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError("raster value outside [0,1]");
        }
    }
}

BinaryMask::BinaryMask(std::size_t w, std::size_t h) : width(w), height(h), bits(w * h, 0) {}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double iou(const BBox& a, const BBox& b) noexcept {
    const double ix = std::min(a.max_x, b.max_x) - std::max(a.min_x, b.min_x);
    const double iy = std::min(a.max_y, b.max_y) - std::max(a.min_y, b.min_y);
    const double inter = (ix > 0.0 && iy > 0.0) ? ix * iy : 0.0;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) {
        return a == b ? 1.0 : 0.0;
    }
    return inter / uni;
}

bool contains(const BBox& box, Point2D p) noexcept {
    return box.min_x <= p.x && p.x <= box.max_x && box.min_y <= p.y && p.y <= box.max_y;
}

double boundary_distance(const BBox& box, Point2D p) noexcept {
    const double dx = std::max({box.min_x - p.x, 0.0, p.x - box.max_x});
    const double dy = std::max({box.min_y - p.y, 0.0, p.y - box.max_y});
    return std::hypot(dx, dy);
}

BinaryMask threshold_mask(const ProbRaster& raster, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw InvalidParameter("threshold must lie in [0,1], got " + std::to_string(theta));
    }
    BinaryMask mask(raster.width, raster.height);
    std::transform(raster.values.begin(), raster.values.end(), mask.bits.begin(),
                   [theta](double p) { return static_cast<std::uint8_t>(p >= theta ? 1 : 0); });
    return mask;
}

namespace {

// Crack-following directions in pixel space (y grows downwards), clockwise.
enum Dir : int { East = 0, South = 1, West = 2, North = 3 };
constexpr std::array<int, 4> kStepX{1, 0, -1, 0};
constexpr std::array<int, 4> kStepY{0, 1, 0, -1};

class BorderTracer {
public:
    explicit BorderTracer(const BinaryMask& mask) : mask_(mask) {}

    // Walks the outer border of the component whose topmost-leftmost pixel is
    // (col, row), keeping foreground on the right. At each corner the two
    // pixels ahead decide the turn; preferring the left turn joins diagonal
    // neighbours, which yields 8-connectivity.
    [[nodiscard]] Ring trace(int col, int row) const {
        Ring ring;
        int vx = col;
        int vy = row;
        int dir = East;
        const int start_x = vx;
        const int start_y = vy;
        ring.push_back({static_cast<double>(vx), static_cast<double>(vy)});
        while (true) {
            vx += kStepX[dir];
            vy += kStepY[dir];
            const int next = turn(vx, vy, dir);
            if (vx == start_x && vy == start_y && next == East) {
                break;
            }
            if (next != dir) {
                ring.push_back({static_cast<double>(vx), static_cast<double>(vy)});
            }
            dir = next;
        }
        return ring;
    }

private:
    [[nodiscard]] bool fg(int c, int r) const {
        if (c < 0 || r < 0 || c >= static_cast<int>(mask_.width) || r >= static_cast<int>(mask_.height)) {
            return false;
        }
        return mask_.at(static_cast<std::size_t>(c), static_cast<std::size_t>(r));
    }

    [[nodiscard]] int turn(int vx, int vy, int dir) const {
        // Pixels around corner (vx, vy).
        const bool nw = fg(vx - 1, vy - 1);
        const bool ne = fg(vx, vy - 1);
        const bool sw = fg(vx - 1, vy);
        const bool se = fg(vx, vy);
        bool left = false;
        bool right = false;
        switch (dir) {
        case East: left = ne; right = se; break;
        case South: left = se; right = sw; break;
        case West: left = sw; right = nw; break;
        default: left = nw; right = ne; break;
        }
        if (left) {
            return (dir + 3) % 4;
        }
        if (right) {
            return dir;
        }
        return (dir + 1) % 4;
    }

    const BinaryMask& mask_;
};

} // namespace

std::vector<Polygon> extract_contours(const BinaryMask& mask) {
    std::vector<Polygon> out;
    const std::size_t w = mask.width;
    const std::size_t h = mask.height;
    std::vector<std::uint8_t> visited(w * h, 0);
    std::vector<std::size_t> stack;
    const BorderTracer tracer(mask);

    for (std::size_t row = 0; row < h; ++row) {
        for (std::size_t col = 0; col < w; ++col) {
            const std::size_t idx = row * w + col;
            if (!mask.bits[idx] || visited[idx]) {
                continue;
            }
            // Raster order guarantees (col, row) is the component's topmost-leftmost pixel.
            out.push_back(Polygon{tracer.trace(static_cast<int>(col), static_cast<int>(row)), {}});

            visited[idx] = 1;
            stack.push_back(idx);
            while (!stack.empty()) {
                const std::size_t cur = stack.back();
                stack.pop_back();
                const auto cr = static_cast<long>(cur / w);
                const auto cc = static_cast<long>(cur % w);
                for (long dr = -1; dr <= 1; ++dr) {
                    for (long dc = -1; dc <= 1; ++dc) {
                        const long nr = cr + dr;
                        const long nc = cc + dc;
                        if (nr < 0 || nc < 0 || nr >= static_cast<long>(h) || nc >= static_cast<long>(w)) {
                            continue;
                        }
                        const std::size_t n = static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc);
                        if (mask.bits[n] && !visited[n]) {
                            visited[n] = 1;
                            stack.push_back(n);
                        }
                    }
                }
            }
        }
    }
    return out;
}

BBox polygon_envelope(const Polygon& polygon, const GeoTransform& transform) {
    if (polygon.exterior.empty()) {
        throw ValidationError("polygon has an empty exterior ring");
    }
    BBox box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Point2D& v : polygon.exterior) {
        const Point2D p = transform.apply(v);
        box.min_x = std::min(box.min_x, p.x);
        box.min_y = std::min(box.min_y, p.y);
        box.max_x = std::max(box.max_x, p.x);
        box.max_y = std::max(box.max_y, p.y);
    }
    return box;
}

std::vector<BBox> filter_min_area(std::span<const BBox> boxes, double min_area) {
    if (!(min_area >= 0.0)) {
        throw InvalidParameter("minimum area must be non-negative");
    }
    std::vector<BBox> out;
    std::copy_if(boxes.begin(), boxes.end(), std::back_inserter(out),
                 [min_area](const BBox& b) { return b.area() >= min_area; });
    return out;
}

Polygon bbox_polygon(const BBox& box) {
    return Polygon{{{box.min_x, box.min_y}, {box.max_x, box.min_y}, {box.max_x, box.max_y}, {box.min_x, box.max_y}},
                   {}};
}

} // namespace crowdmark
