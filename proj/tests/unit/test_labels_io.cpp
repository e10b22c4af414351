#include "crowdmark/errors.hpp"
#include "crowdmark/geojson.hpp"
#include "crowdmark/io.hpp"
#include "crowdmark/labels.hpp"
#include "crowdmark/raster_io.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace crowdmark;

TEST_SUITE("labels") {

TEST_CASE("label names round-trip") {
    for (ResponseLabel l : kAllLabels) {
        CHECK(parse_response_label(to_string(l)) == l);
    }
    CHECK(parse_severity("minor") == Severity::Minor);
    CHECK(parse_severity("catastrophic") == Severity::Catastrophic);
    CHECK_FALSE(parse_severity("empty").has_value());
    CHECK_FALSE(parse_severity("moderate").has_value());
    CHECK_FALSE(parse_response_label("Minor").has_value());
    CHECK(to_response(Severity::Significant) == ResponseLabel::Significant);
    CHECK(index_of(ResponseLabel::Empty) == 0);
    CHECK(index_of(ResponseLabel::Catastrophic) == 3);
}

TEST_CASE("damage fraction bands") {
    CHECK(label_from_damage_fraction(0.0) == ResponseLabel::Empty);
    CHECK(label_from_damage_fraction(0.01) == ResponseLabel::Minor);
    CHECK(label_from_damage_fraction(0.1999) == ResponseLabel::Minor);
    CHECK(label_from_damage_fraction(0.2) == ResponseLabel::Significant);
    CHECK(label_from_damage_fraction(0.6) == ResponseLabel::Significant);
    CHECK(label_from_damage_fraction(0.6001) == ResponseLabel::Catastrophic);
    CHECK(label_from_damage_fraction(1.0) == ResponseLabel::Catastrophic);
    CHECK_THROWS((void)label_from_damage_fraction(-0.1));
    CHECK_THROWS((void)label_from_damage_fraction(1.1));
}

} // TEST_SUITE

TEST_SUITE("io") {

TEST_CASE("parse_csv handles quotes, CRLF and blank lines") {
    const auto t = io::parse_csv("a,b,c\r\n1,\"x,y\",\"say \"\"hi\"\"\"\r\n\r\n2,,\n");
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].fields == std::vector<std::string>{"1", "x,y", "say \"hi\""});
    CHECK(t.rows[0].line == 2);
    CHECK(t.rows[1].fields == std::vector<std::string>{"2", "", ""});
    CHECK(t.rows[1].line == 4);
}

TEST_CASE("csv_escape round-trips through parse_csv") {
    for (std::string s : {"plain", "with,comma", "quote\"inside", " spaced "}) {
        const auto t = io::parse_csv("h\n" + io::csv_escape(s) + "\n");
        REQUIRE(t.rows.size() == 1);
        CHECK(t.rows[0].fields[0] == s);
    }
}

TEST_CASE("require_header names the mismatch") {
    const auto t = io::parse_csv("a,b\n1,2\n");
    CHECK_NOTHROW(io::require_header(t, {"a", "b"}, "table"));
    CHECK_THROWS_AS(io::require_header(t, {"a", "c"}, "table"), ValidationError);
}

TEST_CASE("format_double is shortest round-trip") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng);
        CHECK(io::parse_double(io::format_double(v), 1, "v") == v);
    }
    CHECK(io::format_double(0.1) == "0.1");
    CHECK(io::format_double(5.0) == "5");
}

TEST_CASE("parse_double rejects junk and non-finite values") {
    CHECK(io::parse_double("3.25", 1, "x") == 3.25);
    CHECK(io::parse_double("-1e-3", 1, "x") == -0.001);
    for (const char* bad : {"", "abc", "1.5x", "nan", "inf", " 1"}) {
        CHECK_THROWS_AS((void)io::parse_double(bad, 7, "x"), ValidationError);
    }
    try {
        (void)io::parse_double("oops", 7, "x");
    } catch (const ValidationError& e) {
        CHECK(e.row() == 7u);
    }
}

TEST_CASE("write_file_atomic replaces content and leaves no temp file") {
    const auto dir = testsupport::scratch_dir("io_atomic");
    io::write_file_atomic(dir / "f.txt", "one");
    io::write_file_atomic(dir / "f.txt", "two");
    CHECK(io::read_text_file(dir / "f.txt") == "two");
    CHECK_FALSE(std::filesystem::exists(dir / "f.txt.tmp"));
    CHECK_THROWS_AS((void)io::read_text_file(dir / "missing.txt"), IoError);
}

} // TEST_SUITE

TEST_SUITE("raster_io") {

TEST_CASE("PNG and geotransform round-trip") {
    const auto dir = testsupport::scratch_dir("raster_io");
    const GrayImage img{3, 2, {0, 128, 255, 1, 2, 3}};
    write_png_gray8(dir / "r.png", img);
    const GrayImage back = read_png_gray8(dir / "r.png");
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.pixels == img.pixels);

    const GeoTransform gt{0.5, 0, 100, 0, -0.5, 200};
    write_geotransform(dir / "r.json", gt);
    CHECK(read_geotransform(dir / "r.json") == gt);

    const ProbRaster r = load_prob_raster(dir / "r.png", dir / "r.json");
    CHECK(r.at(2, 0) == 1.0);
    CHECK(r.at(1, 0) == 128.0 / 255.0);
    CHECK(r.transform == gt);
}

TEST_CASE("unreadable rasters and sidecars are reported") {
    const auto dir = testsupport::scratch_dir("raster_io_bad");
    testsupport::write_text(dir / "not.png", "definitely not a png");
    CHECK_THROWS_AS((void)read_png_gray8(dir / "not.png"), IoError);
    CHECK_THROWS_AS((void)read_png_gray8(dir / "missing.png"), IoError);
    testsupport::write_text(dir / "gt.json", R"({"a": 1, "b": 0})");
    CHECK_THROWS((void)read_geotransform(dir / "gt.json"));
}

} // TEST_SUITE

TEST_SUITE("geojson") {

TEST_CASE("polygon features parse and serialize closed") {
    const Polygon p{{{0, 0}, {2, 0}, {2, 1}}, {}};
    const auto j = geojson::to_json(p);
    CHECK(j["type"] == "Polygon");
    CHECK(j["coordinates"][0].size() == 4);
    const nlohmann::json feature{{"type", "Feature"}, {"geometry", j}, {"properties", nlohmann::json::object()}};
    CHECK(geojson::polygon_from_feature(feature, 1) == p);
}

TEST_CASE("non-polygon and degenerate geometry is rejected") {
    const nlohmann::json line{{"type", "Feature"},
                              {"geometry", {{"type", "LineString"}, {"coordinates", {{0, 0}, {1, 1}}}}}};
    CHECK_THROWS_AS((void)geojson::polygon_from_feature(line, 3), ValidationError);
    const nlohmann::json two{{"type", "Feature"},
                             {"geometry", {{"type", "Polygon"}, {"coordinates", {{{0, 0}, {1, 1}, {0, 0}}}}}}};
    CHECK_THROWS_AS((void)geojson::polygon_from_feature(two, 1), ValidationError);
    CHECK_THROWS_AS((void)geojson::parse("{not json", "x"), ValidationError);
    CHECK_THROWS_AS((void)geojson::features(nlohmann::json::object(), "x"), ValidationError);
}

} // TEST_SUITE
