#include "crowdmark/coco_export.hpp"

#include "crowdmark/errors.hpp"
#include "crowdmark/geojson.hpp"

#include <algorithm>
#include <cmath>

namespace crowdmark {

using nlohmann::json;

std::vector<ResultRecord> parse_results_geojson(std::string_view text) {
    const json doc = geojson::parse(text, "results");
    const json& features = geojson::features(doc, "results");
    std::vector<ResultRecord> out;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::size_t row = i + 1;
        const json props = features[i].value("properties", json::object());
        ResultRecord r;
        r.bbox = polygon_envelope(geojson::polygon_from_feature(features[i], row));
        try {
            r.object_id = props.at("object_id").get<std::string>();
            r.subject_id = props.at("subject_id").get<std::string>();
            const std::string label = props.at("hard_label").get<std::string>();
            const auto parsed = parse_response_label(label);
            if (!parsed) {
                throw ValidationError("unknown label '" + label + "'", row);
            }
            r.hard_label = *parsed;
            for (std::size_t j = 0; j < kNumClasses; ++j) {
                r.dist[j] = props.at("p_" + std::string(to_string(label_at(j)))).get<double>();
            }
            r.n_responses = props.at("n_responses").get<std::size_t>();
        } catch (const json::exception& e) {
            throw ValidationError(std::string("malformed result properties: ") + e.what(), row);
        }
        out.push_back(std::move(r));
    }
    return out;
}

json to_coco_json(const std::vector<ResultRecord>& records, const std::map<std::string, CocoImageSize>& sizes) {
    std::vector<std::string> subjects;
    std::map<std::string, std::size_t> image_id;
    std::map<std::string, std::pair<double, double>> extent;
    for (const ResultRecord& r : records) {
        if (image_id.emplace(r.subject_id, subjects.size() + 1).second) {
            subjects.push_back(r.subject_id);
        }
        auto& [w, h] = extent[r.subject_id];
        w = std::max(w, r.bbox.max_x);
        h = std::max(h, r.bbox.max_y);
    }

    json images = json::array();
    for (const std::string& s : subjects) {
        CocoImageSize size;
        if (const auto it = sizes.find(s); it != sizes.end()) {
            size = it->second;
        } else {
            size.width = static_cast<std::size_t>(std::max(1.0, std::ceil(extent[s].first)));
            size.height = static_cast<std::size_t>(std::max(1.0, std::ceil(extent[s].second)));
        }
        images.push_back({{"id", image_id[s]}, {"file_name", s + ".png"}, {"width", size.width}, {"height", size.height}});
    }

    json annotations = json::array();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const ResultRecord& r = records[i];
        const BBox& b = r.bbox;
        annotations.push_back({{"id", i + 1},
                               {"image_id", image_id[r.subject_id]},
                               {"category_id", coco_category_id(r.hard_label)},
                               {"bbox", {b.min_x, b.min_y, b.width(), b.height()}},
                               {"area", b.area()},
                               {"iscrowd", 0},
                               {"segmentation", json::array({json::array({b.min_x, b.min_y, b.max_x, b.min_y, b.max_x,
                                                                          b.max_y, b.min_x, b.max_y})})}});
    }

    json categories = json::array();
    for (ResponseLabel l : kAllLabels) {
        categories.push_back({{"id", coco_category_id(l)}, {"name", std::string(to_string(l))}, {"supercategory", "building"}});
    }
    return {{"images", images}, {"annotations", annotations}, {"categories", categories}};
}

} // namespace crowdmark
