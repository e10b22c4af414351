#include "crowdmark/errors.hpp"
#include "crowdmark/geometry.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace crowdmark;
using testsupport::PixelRect;
using testsupport::raster_with;

namespace {

BBox pixel_extent(const PixelRect& r) {
    return {static_cast<double>(r.col0), static_cast<double>(r.row0), static_cast<double>(r.col1),
            static_cast<double>(r.row1)};
}

BinaryMask mask_of(std::size_t w, std::size_t h, const std::vector<PixelRect>& rects) {
    return threshold_mask(raster_with(w, h, rects), 0.5);
}

BBox random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-50.0, 50.0);
    std::uniform_real_distribution<double> size(0.0, 30.0);
    const double x = pos(rng);
    const double y = pos(rng);
    return {x, y, x + size(rng), y + size(rng)};
}

} // namespace

TEST_SUITE("geometry") {

TEST_CASE("iou examples") {
    CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
    CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
    CHECK(iou({0, 0, 2, 2}, {1, 0, 3, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("iou of degenerate boxes") {
    const BBox point{1, 1, 1, 1};
    CHECK(iou(point, point) == 1.0);
    CHECK(iou(point, {0, 0, 2, 2}) == 0.0);
    CHECK(iou({0, 0, 0, 5}, {0, 0, 0, 6}) == 0.0);
    CHECK(iou({0, 0, 2, 2}, {2, 0, 4, 2}) == 0.0); // touching edges
}

TEST_CASE("iou is symmetric and reflexive on random boxes") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 2000; ++t) {
        const BBox a = random_box(rng);
        const BBox b = random_box(rng);
        CHECK(iou(a, b) == iou(b, a));
        const double v = iou(a, b);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (a.area() > 0.0) {
            CHECK(iou(a, a) == 1.0);
        }
    }
}

TEST_CASE("contains uses a closed boundary") {
    const BBox b{0, 0, 2, 2};
    CHECK(contains(b, {1, 1}));
    CHECK(contains(b, {2, 2}));
    CHECK(contains(b, {0, 1}));
    CHECK_FALSE(contains(b, {2.001, 1}));
    CHECK_FALSE(contains(b, {1, -0.001}));
}

TEST_CASE("boundary distance") {
    const BBox b{0, 0, 2, 2};
    CHECK(boundary_distance(b, {1, 1}) == 0.0);
    CHECK(boundary_distance(b, {5, 1}) == 3.0);
    CHECK(boundary_distance(b, {5, 6}) == 5.0);
    CHECK(boundary_distance(b, {-3, -4}) == 5.0);
}

TEST_CASE("threshold_mask examples") {
    const ProbRaster zeros(3, 2, std::vector<double>(6, 0.0));
    CHECK(threshold_mask(zeros, 0.5).count() == 0);
    const ProbRaster ones(3, 2, std::vector<double>(6, 1.0));
    CHECK(threshold_mask(ones, 0.5).count() == 6);
    const BinaryMask m = threshold_mask(ProbRaster(2, 1, {0.4, 0.6}), 0.5);
    CHECK_FALSE(m.at(0, 0));
    CHECK(m.at(1, 0));
    // value == theta is foreground
    CHECK(threshold_mask(ProbRaster(1, 1, {0.5}), 0.5).at(0, 0));
}

TEST_CASE("threshold_mask rejects theta outside [0, 1]") {
    const ProbRaster r(1, 1, {0.5});
    CHECK_THROWS_AS((void)threshold_mask(r, 1.1), InvalidParameter);
    CHECK_THROWS_AS((void)threshold_mask(r, -0.1), InvalidParameter);
    CHECK_NOTHROW((void)threshold_mask(r, 0.0));
    CHECK_NOTHROW((void)threshold_mask(r, 1.0));
}

TEST_CASE("ProbRaster validates its contract") {
    CHECK_THROWS_AS(ProbRaster(2, 2, {0.0, 0.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(ProbRaster(1, 1, {1.5}), ValidationError);
    CHECK_THROWS_AS(ProbRaster(1, 1, {-0.5}), ValidationError);
}

TEST_CASE("threshold_mask is monotone in theta") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v(8 * 6);
        std::generate(v.begin(), v.end(), [&] { return u(rng); });
        const ProbRaster r(8, 6, v);
        double t1 = u(rng);
        double t2 = u(rng);
        if (t1 > t2) {
            std::swap(t1, t2);
        }
        const BinaryMask lo = threshold_mask(r, t1);
        const BinaryMask hi = threshold_mask(r, t2);
        for (std::size_t i = 0; i < lo.bits.size(); ++i) {
            CHECK((hi.bits[i] == 0 || lo.bits[i] == 1));
        }
    }
}

TEST_CASE("extract_contours examples") {
    CHECK(extract_contours(BinaryMask(5, 5)).empty());

    const PixelRect rect{2, 1, 5, 5}; // 3 wide, 4 tall
    const auto one = extract_contours(mask_of(8, 7, {rect}));
    REQUIRE(one.size() == 1);
    CHECK(polygon_envelope(one[0]) == pixel_extent(rect));
    CHECK(one[0].holes.empty());

    const PixelRect a{0, 0, 2, 2};
    const PixelRect b{4, 3, 7, 6};
    const auto two = extract_contours(mask_of(8, 7, {a, b}));
    REQUIRE(two.size() == 2);
    CHECK(polygon_envelope(two[0]) == pixel_extent(a));
    CHECK(polygon_envelope(two[1]) == pixel_extent(b));
}

TEST_CASE("extract_contours traces an axis-aligned rectangle as four corners") {
    const auto polys = extract_contours(mask_of(6, 6, {{1, 1, 4, 3}}));
    REQUIRE(polys.size() == 1);
    Ring ring = polys[0].exterior;
    REQUIRE(ring.size() == 4);
    std::sort(ring.begin(), ring.end(), [](Point2D p, Point2D q) { return p.x != q.x ? p.x < q.x : p.y < q.y; });
    CHECK(ring == Ring{{1, 1}, {1, 3}, {4, 1}, {4, 3}});
}

TEST_CASE("extract_contours handles single pixels, diagonals and holes") {
    BinaryMask m(5, 5);
    m.set(0, 0, true);
    auto polys = extract_contours(m);
    REQUIRE(polys.size() == 1);
    CHECK(polygon_envelope(polys[0]) == BBox{0, 0, 1, 1});

    // Diagonal neighbours are one 8-connected component.
    m.set(1, 1, true);
    m.set(2, 2, true);
    polys = extract_contours(m);
    REQUIRE(polys.size() == 1);
    CHECK(polygon_envelope(polys[0]) == BBox{0, 0, 3, 3});

    // A ring of pixels: only the outer border comes back.
    BinaryMask ring(5, 5);
    for (std::size_t i = 0; i < 5; ++i) {
        ring.set(i, 0, true);
        ring.set(i, 4, true);
        ring.set(0, i, true);
        ring.set(4, i, true);
    }
    polys = extract_contours(ring);
    REQUIRE(polys.size() == 1);
    CHECK(polys[0].holes.empty());
    CHECK(polygon_envelope(polys[0]) == BBox{0, 0, 5, 5});

    // Component touching every raster edge.
    const auto full = extract_contours(mask_of(4, 3, {{0, 0, 4, 3}}));
    REQUIRE(full.size() == 1);
    CHECK(polygon_envelope(full[0]) == BBox{0, 0, 4, 3});
}

TEST_CASE("extract_contours on an L shape and a U shape") {
    const auto l = extract_contours(mask_of(6, 6, {{1, 1, 2, 5}, {1, 4, 5, 5}}));
    REQUIRE(l.size() == 1);
    CHECK(polygon_envelope(l[0]) == BBox{1, 1, 5, 5});
    CHECK(l[0].exterior.size() == 6);

    const auto u = extract_contours(mask_of(7, 6, {{1, 1, 2, 5}, {4, 1, 5, 5}, {1, 4, 5, 5}}));
    REQUIRE(u.size() == 1);
    CHECK(polygon_envelope(u[0]) == BBox{1, 1, 5, 5});
    CHECK(u[0].exterior.size() == 8);
}

TEST_CASE("rasterized random rectangles are recovered exactly") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        std::uniform_int_distribution<std::size_t> dim(1, 40);
        const std::size_t w = dim(rng) + 2;
        const std::size_t h = dim(rng) + 2;
        std::uniform_int_distribution<std::size_t> c(0, w - 1);
        std::uniform_int_distribution<std::size_t> r(0, h - 1);
        std::size_t c0 = c(rng), c1 = c(rng), r0 = r(rng), r1 = r(rng);
        const PixelRect rect{std::min(c0, c1), std::min(r0, r1), std::max(c0, c1) + 1, std::max(r0, r1) + 1};
        const auto polys = extract_contours(mask_of(w, h, {rect}));
        REQUIRE(polys.size() == 1);
        CHECK(polygon_envelope(polys[0]) == pixel_extent(rect));
    }
}

TEST_CASE("polygon_envelope examples") {
    const Polygon tri{{{0, 0}, {4, 0}, {0, 3}}, {}};
    CHECK(polygon_envelope(tri) == BBox{0, 0, 4, 3});
    CHECK(polygon_envelope(Polygon{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {}}) == BBox{0, 0, 1, 1});
    const GeoTransform scale2{2, 0, 10, 0, 2, 10};
    CHECK(polygon_envelope(tri, scale2) == BBox{10, 10, 18, 16});
    // A north-up raster transform flips y; the envelope is still ordered.
    const GeoTransform north_up{1, 0, 0, 0, -1, 100};
    CHECK(polygon_envelope(tri, north_up) == BBox{0, 97, 4, 100});
    CHECK_THROWS_AS((void)polygon_envelope(Polygon{}), ValidationError);
}

TEST_CASE("filter_min_area examples") {
    const std::vector<BBox> boxes{{0, 0, 1, 1}, {0, 0, 10, 10}};
    CHECK(filter_min_area(boxes, 5.0) == std::vector<BBox>{{0, 0, 10, 10}});
    CHECK(filter_min_area(boxes, 0.0) == boxes);
    CHECK(filter_min_area({}, 3.0).empty());
    CHECK(filter_min_area(boxes, 100.0) == std::vector<BBox>{{0, 0, 10, 10}}); // >= keeps equal area
}

TEST_CASE("bbox_polygon round-trips through the envelope") {
    const BBox b{1.5, -2, 4, 7.25};
    CHECK(polygon_envelope(bbox_polygon(b)) == b);
}

} // TEST_SUITE
