#pragma once

#include "crowdmark/geometry.hpp"
#include "crowdmark/labels.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crowdmark {

/// Non-fatal findings collected while loading (normalizations, skipped data).
struct Diagnostics {
    std::vector<std::string> warnings;

    void warn(std::string message) { warnings.push_back(std::move(message)); }
};

struct Mark {
    std::string volunteer_id;
    std::string subject_id;
    Point2D point;
    Severity severity = Severity::Minor;

    friend bool operator==(const Mark&, const Mark&) = default;
};

/// One volunteer's session(s) on one subject. A classification with no marks
/// and declared_empty == false is still a "seen" record.
struct Classification {
    std::string volunteer_id;
    std::string subject_id;
    std::vector<Mark> marks;
    bool declared_empty = false;

    friend bool operator==(const Classification&, const Classification&) = default;
};

enum class Phase : std::uint8_t { Pre, Post };

[[nodiscard]] std::string_view to_string(Phase p) noexcept;
[[nodiscard]] std::optional<Phase> parse_phase(std::string_view s) noexcept;

struct Footprint {
    std::string id;
    std::string subject_id;
    Polygon polygon; // scene frame
    BBox bbox;       // == polygon_envelope(polygon)
    Phase phase = Phase::Post;
    std::optional<double> score;

    friend bool operator==(const Footprint&, const Footprint&) = default;
};

struct ExpertLabel {
    BBox bbox;
    std::string subject_id;
    ResponseLabel label = ResponseLabel::Empty;

    friend bool operator==(const ExpertLabel&, const ExpertLabel&) = default;
};

// Readers. Parse failures throw ValidationError carrying the offending row.

/// CSV `volunteer_id,subject_id,kind,x,y`. Rows sharing (volunteer, subject)
/// are merged in first-appearance order; their marks are concatenated.
[[nodiscard]] std::vector<Classification> parse_classifications(std::string_view csv, Diagnostics* diag = nullptr);
[[nodiscard]] std::vector<Classification> load_classifications(const std::filesystem::path& path,
                                                               Diagnostics* diag = nullptr);

/// GeoJSON FeatureCollection of Polygons with properties subject_id, phase and
/// optional id and score. Missing ids become "<subject_id>-<n>", n counting
/// the subject's features from 0.
[[nodiscard]] std::vector<Footprint> parse_footprints_geojson(std::string_view text);
[[nodiscard]] std::vector<Footprint> load_footprints_vector(const std::filesystem::path& path);

/// Threshold, trace, georeference and area-filter a probability raster.
/// Ids are "<subject>-<n>", or "<subject>-pre-<n>" for pre-event scenes.
[[nodiscard]] std::vector<Footprint> footprints_from_raster(const ProbRaster& raster, double theta, double min_area,
                                                            std::string_view subject_id, Phase phase);
[[nodiscard]] std::vector<Footprint> load_footprints_raster(const std::filesystem::path& png_path,
                                                            const std::filesystem::path& geotransform_path,
                                                            double theta, double min_area,
                                                            std::string_view subject_id, Phase phase);

/// CSV `subject_id,min_x,min_y,max_x,max_y,label`, or a GeoJSON
/// FeatureCollection (by .geojson/.json extension) with subject_id and label
/// properties whose boxes are the polygon envelopes.
[[nodiscard]] std::vector<ExpertLabel> parse_expert_labels_csv(std::string_view csv);
[[nodiscard]] std::vector<ExpertLabel> load_expert_labels(const std::filesystem::path& path);

// Writers producing exactly the formats the readers accept.

[[nodiscard]] std::string classifications_to_csv(const std::vector<Classification>& classifications);
[[nodiscard]] std::string footprints_to_geojson(const std::vector<Footprint>& footprints);
[[nodiscard]] std::string expert_labels_to_csv(const std::vector<ExpertLabel>& labels);

} // namespace crowdmark
