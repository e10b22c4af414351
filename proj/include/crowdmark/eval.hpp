#pragma once

#include "crowdmark/geometry.hpp"
#include "crowdmark/ingest.hpp"
#include "crowdmark/labels.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace crowdmark {

struct Detection {
    BBox bbox;
    std::string subject_id;
    std::optional<ResponseLabel> label; // nullopt: class-agnostic
    double score = 1.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Processing order for detections: descending score, then subject_id, then
/// bbox (min_x, min_y, max_x, max_y), then label, then input position.
[[nodiscard]] std::vector<std::size_t> detection_order(std::span<const Detection> dets);

struct MatchResult {
    std::vector<std::size_t> order;              // detection indices, processing order
    std::vector<bool> det_tp;                    // by detection index
    std::vector<std::optional<std::size_t>> det_gt; // matched ground-truth index
    std::vector<bool> gt_matched;                // by ground-truth index
};

/// Each detection, in processing order, takes the highest-IoU ground truth of
/// its subject (and class, when class_aware) that is still unmatched, if that
/// IoU reaches iou_thresh. IoU ties go to the earlier ground truth.
[[nodiscard]] MatchResult match_detections(std::span<const Detection> dets, std::span<const ExpertLabel> gts,
                                           double iou_thresh, bool class_aware);

struct PRCurve {
    std::vector<std::pair<double, double>> points; // (recall, precision), fractions
    double ap = 0.0;                               // percent
};

/// Percent scale.
struct VocMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double ap = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    PRCurve curve;
};

/// Precision/recall/F1 over the whole detection set and all-point
/// interpolated AP. No detections and no ground truth scores 100 throughout.
[[nodiscard]] VocMetrics voc_metrics(const MatchResult& match);

struct ClassF1 {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t support = 0;
};

struct F1Report {
    std::array<ClassF1, kNumClasses> classes{};
    double weighted_f1 = 0.0; // over classes with support > 0
    std::size_t total_support = 0;
};

/// One-vs-rest F1 per class (percent). Throws ValidationError when the key
/// sets differ.
[[nodiscard]] F1Report classification_f1(const std::map<std::string, ResponseLabel>& predicted,
                                         const std::map<std::string, ResponseLabel>& truth);

struct CocoParams {
    double small_max_area = 32.0 * 32.0;  // small: area < small_max_area
    double medium_max_area = 96.0 * 96.0; // medium: small_max_area <= area < medium_max_area
};

/// Percent scale; -1 marks a bucket without ground truth.
struct CocoReport {
    double ap = -1.0;
    double ap50 = -1.0;
    double ap75 = -1.0;
    double ap_small = -1.0;
    double ap_medium = -1.0;
    double ap_large = -1.0;

    friend bool operator==(const CocoReport&, const CocoReport&) = default;
};

/// IoU thresholds 0.50:0.05:0.95.
[[nodiscard]] std::array<double, 10> coco_iou_thresholds() noexcept;

/// COCO-style AP with 101-point interpolation. Area buckets restrict both
/// ground truth and detections by box area. In class-aware mode the result is
/// the mean over classes present in the ground truth.
[[nodiscard]] CocoReport coco_ap(std::span<const Detection> dets, std::span<const ExpertLabel> gts, bool class_aware,
                                 const CocoParams& params = {});

// Inputs

/// CSV `subject_id,min_x,min_y,max_x,max_y,label,score` (label may be blank),
/// or a GeoJSON FeatureCollection with subject_id and optional score and
/// label/hard_label properties. A GeoJSON feature without score takes the
/// p_<hard_label> property, else 1.
[[nodiscard]] std::vector<Detection> load_detections(const std::filesystem::path& path);

/// CSV with an object_id column and a label (or hard_label) column.
[[nodiscard]] std::map<std::string, ResponseLabel> parse_label_map(std::string_view csv);
[[nodiscard]] std::map<std::string, ResponseLabel> load_label_map(const std::filesystem::path& path);

// Reports

[[nodiscard]] nlohmann::json to_json(const VocMetrics& m);
[[nodiscard]] nlohmann::json to_json(const F1Report& r);
[[nodiscard]] nlohmann::json to_json(const CocoReport& r);

/// Aligned plain-text tables, one row per (name, report).
[[nodiscard]] std::string voc_table(std::span<const std::pair<std::string, VocMetrics>> rows);
[[nodiscard]] std::string f1_table(std::span<const std::pair<std::string, F1Report>> rows);
[[nodiscard]] std::string coco_table(std::span<const std::pair<std::string, CocoReport>> rows);

} // namespace crowdmark
