#pragma once

#include "crowdmark/aggregate.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crowdmark {

/// One row of an aggregation results GeoJSON file.
struct ResultRecord {
    std::string object_id;
    std::string subject_id;
    BBox bbox;
    ResponseLabel hard_label = ResponseLabel::Empty;
    ClassDist dist{};
    std::size_t n_responses = 0;

    friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

/// Reads the FeatureCollection written by results_to_geojson.
[[nodiscard]] std::vector<ResultRecord> parse_results_geojson(std::string_view text);

struct CocoImageSize {
    std::size_t width = 0;
    std::size_t height = 0;
};

/// COCO detection annotations: one image per subject (first-appearance
/// order, file_name "<subject_id>.png"), one annotation per object with bbox
/// [x, y, width, height], categories 1 empty, 2 minor, 3 significant,
/// 4 catastrophic. Images without an entry in `sizes` get the ceiling of
/// their objects' extent.
[[nodiscard]] nlohmann::json to_coco_json(const std::vector<ResultRecord>& records,
                                          const std::map<std::string, CocoImageSize>& sizes = {});

[[nodiscard]] constexpr int coco_category_id(ResponseLabel l) noexcept { return static_cast<int>(index_of(l)) + 1; }

} // namespace crowdmark
