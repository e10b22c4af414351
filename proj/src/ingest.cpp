#include "crowdmark/ingest.hpp"

#include "crowdmark/errors.hpp"
#include "crowdmark/geojson.hpp"
#include "crowdmark/io.hpp"
#include "crowdmark/raster_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace crowdmark {

using nlohmann::json;

std::string_view to_string(Phase p) noexcept { return p == Phase::Pre ? "pre" : "post"; }

std::optional<Phase> parse_phase(std::string_view s) noexcept {
    if (s == "pre") {
        return Phase::Pre;
    }
    if (s == "post") {
        return Phase::Post;
    }
    return std::nullopt;
}

namespace {

const std::vector<std::string> kClassificationHeader{"volunteer_id", "subject_id", "kind", "x", "y"};
const std::vector<std::string> kExpertHeader{"subject_id", "min_x", "min_y", "max_x", "max_y", "label"};

std::string string_property(const json& props, const char* key, std::size_t row, bool required) {
    if (!props.is_object() || !props.contains(key) || props[key].is_null()) {
        if (required) {
            throw ValidationError(std::string("missing property '") + key + "'", row);
        }
        return {};
    }
    if (!props[key].is_string() || props[key].get<std::string>().empty()) {
        throw ValidationError(std::string("property '") + key + "' must be a non-empty string", row);
    }
    return props[key].get<std::string>();
}

bool has_json_extension(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return ext == ".geojson" || ext == ".json";
}

} // namespace

std::vector<Classification> parse_classifications(std::string_view csv, Diagnostics* diag) {
    const io::CsvTable table = io::parse_csv(csv);
    io::require_header(table, kClassificationHeader, "classifications");

    std::vector<Classification> out;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    std::vector<bool> saw_empty_row;

    for (const io::CsvRow& row : table.rows) {
        if (row.fields.size() != kClassificationHeader.size()) {
            throw ValidationError("expected 5 fields, found " + std::to_string(row.fields.size()), row.line);
        }
        const std::string& volunteer = row.fields[0];
        const std::string& subject = row.fields[1];
        const std::string& kind = row.fields[2];
        if (volunteer.empty() || subject.empty()) {
            throw ValidationError("volunteer_id and subject_id must be non-empty", row.line);
        }
        const auto key = std::make_pair(volunteer, subject);
        auto [it, inserted] = index.try_emplace(key, out.size());
        if (inserted) {
            out.push_back(Classification{volunteer, subject, {}, true});
            saw_empty_row.push_back(false);
        }
        Classification& cls = out[it->second];

        if (kind == "empty") {
            if (!row.fields[3].empty() || !row.fields[4].empty()) {
                throw ValidationError("empty rows must leave x and y blank", row.line);
            }
            saw_empty_row[it->second] = true;
            continue;
        }
        const auto severity = parse_severity(kind);
        if (!severity) {
            throw ValidationError("unknown severity '" + kind + "'", row.line);
        }
        const Point2D p{io::parse_double(row.fields[3], row.line, "x"), io::parse_double(row.fields[4], row.line, "y")};
        cls.marks.push_back(Mark{volunteer, subject, p, *severity});
        cls.declared_empty = false;
    }

    for (std::size_t i = 0; i < out.size(); ++i) {
        if (saw_empty_row[i] && !out[i].marks.empty() && diag) {
            diag->warn("volunteer '" + out[i].volunteer_id + "' declared subject '" + out[i].subject_id +
                       "' empty but also placed marks; treating it as not empty");
        }
    }
    return out;
}

std::vector<Classification> load_classifications(const std::filesystem::path& path, Diagnostics* diag) {
    return parse_classifications(io::read_text_file(path), diag);
}

std::vector<Footprint> parse_footprints_geojson(std::string_view text) {
    const json doc = geojson::parse(text, "footprints");
    const json& features = geojson::features(doc, "footprints");

    std::vector<Footprint> out;
    std::map<std::string, std::size_t> per_subject;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::size_t row = i + 1;
        const json& feature = features[i];
        Footprint fp;
        fp.polygon = geojson::polygon_from_feature(feature, row);
        fp.bbox = polygon_envelope(fp.polygon);
        const json props = feature.value("properties", json::object());
        fp.subject_id = string_property(props, "subject_id", row, true);

        if (props.contains("phase") && !props["phase"].is_string()) {
            throw ValidationError("phase must be a string", row);
        }
        const std::string phase = props.contains("phase") ? props["phase"].get<std::string>() : "post";
        const auto parsed = parse_phase(phase);
        if (!parsed) {
            throw ValidationError("unknown phase '" + phase + "'", row);
        }
        fp.phase = *parsed;

        if (props.contains("score") && !props["score"].is_null()) {
            if (!props["score"].is_number()) {
                throw ValidationError("score must be a number", row);
            }
            const double s = props["score"].get<double>();
            if (!(s >= 0.0 && s <= 1.0)) {
                throw ValidationError("score must lie in [0,1]", row);
            }
            fp.score = s;
        }

        const std::size_t n = per_subject[fp.subject_id]++;
        fp.id = string_property(props, "id", row, false);
        if (fp.id.empty()) {
            fp.id = fp.subject_id + "-" + std::to_string(n);
        }
        if (!ids.insert(fp.id).second) {
            throw ValidationError("duplicate footprint id '" + fp.id + "'", row);
        }
        out.push_back(std::move(fp));
    }
    return out;
}

std::vector<Footprint> load_footprints_vector(const std::filesystem::path& path) {
    return parse_footprints_geojson(io::read_text_file(path));
}

std::vector<Footprint> footprints_from_raster(const ProbRaster& raster, double theta, double min_area,
                                              std::string_view subject_id, Phase phase) {
    if (!(min_area >= 0.0)) {
        throw InvalidParameter("minimum area must be non-negative");
    }
    if (subject_id.empty()) {
        throw ValidationError("raster footprints need a subject id");
    }
    const BinaryMask mask = threshold_mask(raster, theta);
    std::vector<Footprint> out;
    for (const Polygon& pixel_poly : extract_contours(mask)) {
        const BBox box = polygon_envelope(pixel_poly, raster.transform);
        if (box.area() < min_area) {
            continue;
        }
        Polygon scene;
        scene.exterior.reserve(pixel_poly.exterior.size());
        for (const Point2D& v : pixel_poly.exterior) {
            scene.exterior.push_back(raster.transform.apply(v));
        }
        Footprint fp;
        fp.id = std::string(subject_id) + (phase == Phase::Pre ? "-pre-" : "-") + std::to_string(out.size());
        fp.subject_id = std::string(subject_id);
        fp.polygon = std::move(scene);
        fp.bbox = box;
        fp.phase = phase;
        out.push_back(std::move(fp));
    }
    return out;
}

std::vector<Footprint> load_footprints_raster(const std::filesystem::path& png_path,
                                              const std::filesystem::path& geotransform_path, double theta,
                                              double min_area, std::string_view subject_id, Phase phase) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw InvalidParameter("threshold must lie in [0,1], got " + io::format_double(theta));
    }
    return footprints_from_raster(load_prob_raster(png_path, geotransform_path), theta, min_area, subject_id, phase);
}

std::vector<ExpertLabel> parse_expert_labels_csv(std::string_view csv) {
    const io::CsvTable table = io::parse_csv(csv);
    io::require_header(table, kExpertHeader, "expert labels");
    std::vector<ExpertLabel> out;
    for (const io::CsvRow& row : table.rows) {
        if (row.fields.size() != kExpertHeader.size()) {
            throw ValidationError("expected 6 fields, found " + std::to_string(row.fields.size()), row.line);
        }
        ExpertLabel label;
        label.subject_id = row.fields[0];
        if (label.subject_id.empty()) {
            throw ValidationError("subject_id must be non-empty", row.line);
        }
        label.bbox = {io::parse_double(row.fields[1], row.line, "min_x"), io::parse_double(row.fields[2], row.line, "min_y"),
                      io::parse_double(row.fields[3], row.line, "max_x"), io::parse_double(row.fields[4], row.line, "max_y")};
        if (!label.bbox.valid()) {
            throw ValidationError("bounding box has min greater than max", row.line);
        }
        const auto l = parse_response_label(row.fields[5]);
        if (!l) {
            throw ValidationError("unknown label '" + row.fields[5] + "'", row.line);
        }
        label.label = *l;
        out.push_back(std::move(label));
    }
    return out;
}

std::vector<ExpertLabel> load_expert_labels(const std::filesystem::path& path) {
    const std::string text = io::read_text_file(path);
    if (!has_json_extension(path)) {
        return parse_expert_labels_csv(text);
    }
    const json doc = geojson::parse(text, "expert labels");
    const json& features = geojson::features(doc, "expert labels");
    std::vector<ExpertLabel> out;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::size_t row = i + 1;
        const json props = features[i].value("properties", json::object());
        ExpertLabel label;
        label.bbox = polygon_envelope(geojson::polygon_from_feature(features[i], row));
        label.subject_id = string_property(props, "subject_id", row, true);
        const std::string name = string_property(props, "label", row, true);
        const auto l = parse_response_label(name);
        if (!l) {
            throw ValidationError("unknown label '" + name + "'", row);
        }
        label.label = *l;
        out.push_back(std::move(label));
    }
    return out;
}

std::string classifications_to_csv(const std::vector<Classification>& classifications) {
    std::string out = "volunteer_id,subject_id,kind,x,y\n";
    for (const Classification& c : classifications) {
        const std::string prefix = io::csv_escape(c.volunteer_id) + "," + io::csv_escape(c.subject_id) + ",";
        if (c.marks.empty()) {
            out += prefix + "empty,,\n";
            continue;
        }
        for (const Mark& m : c.marks) {
            out += prefix + std::string(to_string(m.severity)) + "," + io::format_double(m.point.x) + "," +
                   io::format_double(m.point.y) + "\n";
        }
    }
    return out;
}

std::string footprints_to_geojson(const std::vector<Footprint>& footprints) {
    json features = json::array();
    for (const Footprint& fp : footprints) {
        json props{{"id", fp.id}, {"subject_id", fp.subject_id}, {"phase", std::string(to_string(fp.phase))}};
        if (fp.score) {
            props["score"] = *fp.score;
        }
        features.push_back({{"type", "Feature"}, {"geometry", geojson::to_json(fp.polygon)}, {"properties", props}});
    }
    return geojson::feature_collection(std::move(features)).dump(1) + "\n";
}

std::string expert_labels_to_csv(const std::vector<ExpertLabel>& labels) {
    std::string out = "subject_id,min_x,min_y,max_x,max_y,label\n";
    for (const ExpertLabel& l : labels) {
        out += io::csv_escape(l.subject_id) + "," + io::format_double(l.bbox.min_x) + "," +
               io::format_double(l.bbox.min_y) + "," + io::format_double(l.bbox.max_x) + "," +
               io::format_double(l.bbox.max_y) + "," + std::string(to_string(l.label)) + "\n";
    }
    return out;
}

} // namespace crowdmark
