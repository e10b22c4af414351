#include "crowdmark/geojson.hpp"

#include "crowdmark/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace crowdmark::geojson {

using nlohmann::json;

namespace {

Ring ring_from_json(const json& coords, std::size_t feature) {
    if (!coords.is_array()) {
        throw ValidationError("ring coordinates must be an array", feature);
    }
    Ring ring;
    for (const auto& pos : coords) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
            throw ValidationError("ring position must be [x, y]", feature);
        }
        const Point2D p{pos[0].get<double>(), pos[1].get<double>()};
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ValidationError("ring position is not finite", feature);
        }
        ring.push_back(p);
    }
    if (ring.size() > 1 && ring.front() == ring.back()) {
        ring.pop_back();
    }
    std::vector<std::pair<double, double>> distinct;
    for (const auto& p : ring) {
        distinct.emplace_back(p.x, p.y);
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) {
        throw ValidationError("polygon ring needs at least 3 distinct vertices", feature);
    }
    return ring;
}

json ring_to_json(const Ring& ring) {
    json coords = json::array();
    for (const auto& p : ring) {
        coords.push_back({p.x, p.y});
    }
    if (!ring.empty()) {
        coords.push_back({ring.front().x, ring.front().y});
    }
    return coords;
}

} // namespace

json to_json(const Polygon& poly) {
    json rings = json::array();
    rings.push_back(ring_to_json(poly.exterior));
    for (const auto& h : poly.holes) {
        rings.push_back(ring_to_json(h));
    }
    return {{"type", "Polygon"}, {"coordinates", rings}};
}

json parse(std::string_view text, std::string_view what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string(what) + ": invalid JSON: " + e.what());
    }
}

const json& features(const json& doc, std::string_view what) {
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
        !doc["features"].is_array()) {
        throw ValidationError(std::string(what) + ": expected a GeoJSON FeatureCollection");
    }
    return doc["features"];
}

Polygon polygon_from_feature(const json& feature, std::size_t row) {
    if (!feature.is_object() || !feature.contains("geometry") || !feature["geometry"].is_object()) {
        throw ValidationError("feature has no geometry", row);
    }
    const json& geom = feature["geometry"];
    const std::string type = geom.value("type", "");
    if (type != "Polygon") {
        throw ValidationError("geometry type '" + type + "' is not Polygon", row);
    }
    const json& rings = geom.value("coordinates", json::array());
    if (!rings.is_array() || rings.empty()) {
        throw ValidationError("polygon has no rings", row);
    }
    Polygon poly;
    poly.exterior = ring_from_json(rings[0], row);
    for (std::size_t i = 1; i < rings.size(); ++i) {
        poly.holes.push_back(ring_from_json(rings[i], row));
    }
    return poly;
}

json feature_collection(json features) {
    return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

} // namespace crowdmark::geojson
