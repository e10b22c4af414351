#include "cli.hpp"

#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sstream>

using namespace crowdmark;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "crowdmark");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    Outcome o;
    o.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

json read_json(const fs::path& p) { return json::parse(testsupport::read_text(p)); }

// A 12x10 raster with one 5x4 rectangle of probability ~0.9 at cols 3..7, rows 2..5.
void write_rect_raster(const fs::path& dir) {
    std::vector<std::uint8_t> px(12 * 10, 0);
    for (std::size_t r = 2; r < 6; ++r) {
        for (std::size_t c = 3; c < 8; ++c) {
            px[r * 12 + c] = 230;
        }
    }
    testsupport::write_raster_files(dir / "r.png", dir / "r.json", 12, 10, px, GeoTransform{1, 0, 0, 0, 1, 0});
}

void write_marks_fixture(const fs::path& dir) {
    testsupport::write_text(dir / "cls.csv", "volunteer_id,subject_id,kind,x,y\n"
                                             "v1,s1,minor,5,5\n"
                                             "v2,s1,minor,4,6\n"
                                             "v3,s1,empty,,\n");
    testsupport::write_text(dir / "fp.geojson", R"({"type":"FeatureCollection","features":[{"type":"Feature",
        "properties":{"subject_id":"s1","phase":"post","id":"b1"},
        "geometry":{"type":"Polygon","coordinates":[[[0,0],[10,0],[10,10],[0,10],[0,0]]]}}]})");
}

std::size_t feature_count(const fs::path& p) { return read_json(p)["features"].size(); }

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 2") {
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"simulate", "--objects", "many"}).code == 2);
    CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("config errors exit with 2 and write nothing") {
    const auto dir = testsupport::scratch_dir("cli_config");
    testsupport::write_text(dir / "bad.json", R"({"simulate": {"n_objects": 10, "colour": "red"}})");
    const auto o = run_cli({"simulate", "--config", (dir / "bad.json").string(), "--out", (dir / "out").string()});
    CHECK(o.code == 2);
    CHECK(o.err.find("colour") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out"));

    testsupport::write_text(dir / "range.json", R"({"simulate": {"visibility": 2}})");
    CHECK(run_cli({"simulate", "--config", (dir / "range.json").string(), "--out", (dir / "out").string()}).code == 2);
    CHECK_FALSE(fs::exists(dir / "out"));

    testsupport::write_text(dir / "broken.json", "{");
    CHECK(run_cli({"simulate", "--config", (dir / "broken.json").string()}).code == 2);
    CHECK(run_cli({"simulate", "--config", (dir / "missing.json").string()}).code != 0);
}

TEST_CASE("flags win over the config and relative paths follow the config file") {
    const auto dir = testsupport::scratch_dir("cli_flags");
    testsupport::write_text(dir / "c.json", R"({"out": "sim", "seed": 3, "simulate": {"n_objects": 30}})");
    REQUIRE(run_cli({"simulate", "--config", (dir / "c.json").string()}).code == 0);
    const std::string truth = testsupport::read_text(dir / "sim" / "truth.csv");
    CHECK(std::count(truth.begin(), truth.end(), '\n') == 31);

    REQUIRE(run_cli({"simulate", "--config", (dir / "c.json").string(), "--objects", "20"}).code == 0);
    const std::string fewer = testsupport::read_text(dir / "sim" / "truth.csv");
    CHECK(std::count(fewer.begin(), fewer.end(), '\n') == 21);

    // The seed flag changes the crowd.
    const std::string cls3 = testsupport::read_text(dir / "sim" / "classifications.csv");
    REQUIRE(run_cli({"simulate", "--config", (dir / "c.json").string(), "--objects", "20", "--seed", "4"}).code == 0);
    CHECK(testsupport::read_text(dir / "sim" / "classifications.csv") != cls3);
}

TEST_CASE("extract examples") {
    const auto dir = testsupport::scratch_dir("cli_extract");
    write_rect_raster(dir);
    const std::vector<std::string> base{"extract", "--png", (dir / "r.png").string(), "--geotransform",
                                        (dir / "r.json").string(), "--subject", "s1"};
    auto args = base;
    args.insert(args.end(), {"--out", (dir / "a").string()});
    const auto o = run_cli(args);
    REQUIRE(o.code == 0);
    const json fc = read_json(dir / "a" / "footprints.geojson");
    REQUIRE(fc["features"].size() == 1);
    CHECK(fc["features"][0]["properties"]["subject_id"] == "s1");

    args = base;
    args.insert(args.end(), {"--out", (dir / "b").string(), "--theta", "1.1"});
    CHECK(run_cli(args).code == 2);
    CHECK_FALSE(fs::exists(dir / "b"));

    args = base;
    args.insert(args.end(), {"--out", (dir / "c").string(), "--theta", "0.95"});
    REQUIRE(run_cli(args).code == 0);
    CHECK(feature_count(dir / "c" / "footprints.geojson") == 0);

    // Missing raster file is a runtime failure.
    CHECK(run_cli({"extract", "--png", (dir / "nope.png").string(), "--geotransform", (dir / "r.json").string(),
                   "--subject", "s1", "--out", (dir / "d").string()})
              .code == 1);
}

TEST_CASE("aggregate writes every output and reruns byte-identically") {
    const auto dir = testsupport::scratch_dir("cli_aggregate");
    write_marks_fixture(dir);
    for (const char* method : {"mv", "em", "ibcc"}) {
        CAPTURE(method);
        const auto a = dir / (std::string(method) + "_a");
        const auto b = dir / (std::string(method) + "_b");
        for (const auto& out : {a, b}) {
            REQUIRE(run_cli({"aggregate", "--method", method, "--classifications", (dir / "cls.csv").string(),
                             "--footprints", (dir / "fp.geojson").string(), "--out", out.string()})
                        .code == 0);
        }
        for (const char* f : {"results.geojson", "results.csv", "volunteers.json", "matrix.csv", "convergence.log"}) {
            CHECK(testsupport::read_text(a / f) == testsupport::read_text(b / f));
        }
        const json res = read_json(a / "results.geojson");
        REQUIRE(res["features"].size() == 1);
        CHECK(res["features"][0]["properties"]["hard_label"] == "minor");
        CHECK(testsupport::read_text(a / "matrix.csv") == "object_id,v1,v2,v3\nb1,1,1,E\n");
        CHECK(testsupport::read_text(a / "convergence.log").rfind(std::string("method ") + method, 0) == 0);
    }
    CHECK(testsupport::read_text(dir / "mv_a" / "volunteers.json") == "[]\n");
    CHECK(read_json(dir / "ibcc_a" / "volunteers.json")[0].contains("alpha"));
    CHECK(read_json(dir / "em_a" / "volunteers.json")[0].contains("confusion"));

    CHECK(run_cli({"aggregate", "--method", "vote", "--classifications", (dir / "cls.csv").string(), "--footprints",
                   (dir / "fp.geojson").string(), "--out", (dir / "x").string()})
              .code == 2);
    CHECK(run_cli({"aggregate", "--footprints", (dir / "fp.geojson").string(), "--out", (dir / "x").string()}).code ==
          2);
}

TEST_CASE("noiseless simulated crowd: mv consensus equals the truth") {
    const auto dir = testsupport::scratch_dir("cli_noiseless");
    REQUIRE(run_cli({"simulate", "--out", (dir / "sim").string(), "--spammer-fraction", "0", "--reliable-diagonal",
                     "1", "--visibility", "1", "--volunteers", "5", "--objects", "60"})
                .code == 0);
    REQUIRE(run_cli({"aggregate", "--method", "mv", "--classifications", (dir / "sim" / "classifications.csv").string(),
                     "--footprints", (dir / "sim" / "footprints.geojson").string(), "--out", (dir / "agg").string()})
                .code == 0);
    const auto o = run_cli({"evaluate", "--mode", "classification", "--predictions",
                            (dir / "agg" / "results.csv").string(), "--truth", (dir / "sim" / "truth.csv").string(),
                            "--out", (dir / "eval").string()});
    REQUIRE(o.code == 0);
    const json report = read_json(dir / "eval" / "report.json");
    CHECK(report["mode"] == "classification");
    CHECK(report["name"] == "results");
    CHECK(report["metrics"]["average"]["f1"].get<double>() == doctest::Approx(100.0));
    const std::string table = testsupport::read_text(dir / "eval" / "report.txt");
    CHECK(table.find("average / 60") != std::string::npos);
}

TEST_CASE("evaluate detection and coco modes") {
    const auto dir = testsupport::scratch_dir("cli_evaluate");
    testsupport::write_text(dir / "truth.csv", "subject_id,min_x,min_y,max_x,max_y,label\n"
                                               "a,0,0,20,20,minor\n"
                                               "a,50,0,100,50,significant\n"
                                               "a,200,0,320,100,empty\n"
                                               "a,0,100,30,130,catastrophic\n"
                                               "a,100,100,160,160,minor\n");
    testsupport::write_text(dir / "pred.csv", "subject_id,min_x,min_y,max_x,max_y,label,score\n"
                                              "a,1,1,21,21,minor,0.95\n"
                                              "a,55,5,105,55,significant,0.9\n"
                                              "a,200,0,320,100,empty,0.85\n"
                                              "a,0,0,20,20,minor,0.8\n"
                                              "a,110,110,170,170,significant,0.7\n"
                                              "a,300,300,330,330,catastrophic,0.6\n"
                                              "a,5,105,30,130,catastrophic,0.5\n");
    REQUIRE(run_cli({"evaluate", "--mode", "coco", "--predictions", (dir / "pred.csv").string(), "--truth",
                     (dir / "truth.csv").string(), "--out", (dir / "aware").string()})
                .code == 0);
    const json aware = read_json(dir / "aware" / "report.json")["metrics"];
    CHECK(std::abs(aware["AP"].get<double>() - 50.73019801980198) < 1e-9);
    CHECK(std::abs(aware["APl"].get<double>() - 100.0) < 1e-9);

    REQUIRE(run_cli({"evaluate", "--mode", "coco", "--class-agnostic", "--predictions", (dir / "pred.csv").string(),
                     "--truth", (dir / "truth.csv").string(), "--out", (dir / "agnostic").string()})
                .code == 0);
    const json agnostic = read_json(dir / "agnostic" / "report.json")["metrics"];
    CHECK(std::abs(agnostic["AP"].get<double>() - 46.8387553041018) < 1e-9);
    CHECK(std::abs(agnostic["AP50"].get<double>() - 90.3818953323902) < 1e-9);

    // Perfect detections score 100 in detection mode.
    testsupport::write_text(dir / "perfect.csv", "subject_id,min_x,min_y,max_x,max_y,label,score\n"
                                                 "a,0,0,20,20,,1\n"
                                                 "a,50,0,100,50,,1\n"
                                                 "a,200,0,320,100,,1\n"
                                                 "a,0,100,30,130,,1\n"
                                                 "a,100,100,160,160,,1\n");
    REQUIRE(run_cli({"evaluate", "--mode", "detection", "--predictions", (dir / "perfect.csv").string(), "--truth",
                     (dir / "truth.csv").string(), "--out", (dir / "det").string(), "--name", "2023-02-07"})
                .code == 0);
    const json det = read_json(dir / "det" / "report.json");
    CHECK(det["metrics"]["f1"].get<double>() == doctest::Approx(100.0));
    CHECK(det["metrics"]["ap50"].get<double>() == doctest::Approx(100.0));
    CHECK(testsupport::read_text(dir / "det" / "report.txt").find("2023-02-07") != std::string::npos);
}

TEST_CASE("sweep-threshold") {
    const auto dir = testsupport::scratch_dir("cli_sweep");
    write_rect_raster(dir);
    testsupport::write_text(dir / "truth.csv", "subject_id,min_x,min_y,max_x,max_y,label\ns1,3,2,8,6,minor\n");
    const std::vector<std::string> base{"sweep-threshold", "--png", (dir / "r.png").string(), "--geotransform",
                                        (dir / "r.json").string(), "--subject", "s1", "--truth",
                                        (dir / "truth.csv").string()};
    auto args = base;
    args.insert(args.end(), {"--out", (dir / "a").string()});
    REQUIRE(run_cli(args).code == 0);
    const json sweep = read_json(dir / "a" / "sweep.json");
    REQUIRE(sweep["rows"].size() == 9);
    for (const auto& row : sweep["rows"]) {
        // The rectangle sits at 230/255: every grid value below it finds it exactly.
        CHECK(row["f1"].get<double>() == doctest::Approx(100.0));
    }
    CHECK(sweep["best_theta"].get<double>() == doctest::Approx(0.1));

    args = base;
    args.insert(args.end(), {"--out", (dir / "b").string(), "--thresholds", "0.5"});
    REQUIRE(run_cli(args).code == 0);
    CHECK(read_json(dir / "b" / "sweep.json")["rows"].size() == 1);

    args = base;
    args.insert(args.end(), {"--out", (dir / "c").string(), "--thresholds", "0.5,1.5"});
    CHECK(run_cli(args).code == 2);
}

TEST_CASE("sweep-threshold picks the level that separates core from halo") {
    const auto dir = testsupport::scratch_dir("cli_sweep_levels");
    // A 0.8 core (cols 6..11, rows 6..11) inside a ~0.3 halo (cols 2..15, rows 2..15).
    std::vector<std::uint8_t> px(20 * 20, 0);
    for (std::size_t r = 2; r < 16; ++r) {
        for (std::size_t c = 2; c < 16; ++c) {
            px[r * 20 + c] = (r >= 6 && r < 12 && c >= 6 && c < 12) ? 204 : 77;
        }
    }
    testsupport::write_raster_files(dir / "r.png", dir / "r.json", 20, 20, px, GeoTransform{1, 0, 0, 0, 1, 0});
    testsupport::write_text(dir / "truth.csv", "subject_id,min_x,min_y,max_x,max_y,label\ns1,6,6,12,12,minor\n");
    REQUIRE(run_cli({"sweep-threshold", "--png", (dir / "r.png").string(), "--geotransform",
                     (dir / "r.json").string(), "--subject", "s1", "--truth", (dir / "truth.csv").string(), "--out",
                     (dir / "out").string()})
                .code == 0);
    const json sweep = read_json(dir / "out" / "sweep.json");
    const double best = sweep["best_theta"].get<double>();
    CHECK(best > 0.3);
    CHECK(best <= 0.8);
    CHECK(sweep["best_f1"].get<double>() == doctest::Approx(100.0));
    CHECK(sweep["rows"][0]["f1"].get<double>() == 0.0); // halo swallows the core
    CHECK(sweep["rows"][8]["footprints"].get<std::size_t>() == 0);
}

TEST_CASE("export-coco") {
    const auto dir = testsupport::scratch_dir("cli_coco");
    write_marks_fixture(dir);
    REQUIRE(run_cli({"aggregate", "--method", "mv", "--classifications", (dir / "cls.csv").string(), "--footprints",
                     (dir / "fp.geojson").string(), "--out", (dir / "agg").string()})
                .code == 0);
    REQUIRE(run_cli({"export-coco", "--results", (dir / "agg" / "results.geojson").string(), "--out",
                     (dir / "coco").string()})
                .code == 0);
    const json coco = read_json(dir / "coco" / "coco.json");
    REQUIRE(coco["annotations"].size() == 1);
    const json& ann = coco["annotations"][0];
    CHECK(ann["category_id"] == 2);
    CHECK(ann["bbox"] == json::array({0.0, 0.0, 10.0, 10.0}));
    CHECK(ann["area"] == 100.0);
    CHECK(ann["iscrowd"] == 0);
    CHECK(coco["images"][0]["id"] == ann["image_id"]);
    CHECK(coco["categories"].size() == 4);

    testsupport::write_text(dir / "empty.geojson", R"({"type":"FeatureCollection","features":[]})");
    REQUIRE(run_cli({"export-coco", "--results", (dir / "empty.geojson").string(), "--out", (dir / "e").string()})
                .code == 0);
    const json empty = read_json(dir / "e" / "coco.json");
    CHECK(empty["annotations"].empty());
    CHECK(empty["images"].empty());
}

TEST_CASE("outputs never overwrite inputs") {
    const auto dir = testsupport::scratch_dir("cli_overwrite");
    testsupport::write_text(dir / "coco.json", R"({"type":"FeatureCollection","features":[]})");
    const auto o = run_cli({"export-coco", "--results", (dir / "coco.json").string(), "--out", dir.string()});
    CHECK(o.code == 2);
    CHECK(testsupport::read_text(dir / "coco.json") == R"({"type":"FeatureCollection","features":[]})");

    write_marks_fixture(dir);
    CHECK(run_cli({"aggregate", "--classifications", (dir / "cls.csv").string(), "--footprints",
                   (dir / "fp.geojson").string(), "--out", (dir / "cls.csv").string()})
              .code == 2);
}

} // TEST_SUITE
