#pragma once

#include "crowdmark/geometry.hpp"

#include <json.hpp>

#include <cstddef>
#include <string_view>

namespace crowdmark::geojson {

/// Polygon geometry object; rings are written closed.
[[nodiscard]] nlohmann::json to_json(const Polygon& polygon);

/// Parses a Feature's Polygon geometry. Closing duplicates are dropped and
/// every ring needs 3 distinct vertices. `row` is the 1-based feature index.
[[nodiscard]] Polygon polygon_from_feature(const nlohmann::json& feature, std::size_t row);

[[nodiscard]] nlohmann::json parse(std::string_view text, std::string_view what);

/// The `features` array of a FeatureCollection document.
[[nodiscard]] const nlohmann::json& features(const nlohmann::json& doc, std::string_view what);

[[nodiscard]] nlohmann::json feature_collection(nlohmann::json features);

} // namespace crowdmark::geojson
