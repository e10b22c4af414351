#pragma once

#include "crowdmark/geometry.hpp"
#include "crowdmark/ingest.hpp"
#include "crowdmark/labels.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crowdmark {

/// A matrix cell: std::nullopt means Unseen (the volunteer never viewed the
/// object's subject); otherwise the volunteer's response.
using CellValue = std::optional<ResponseLabel>;

struct ObjectRecord {
    std::string object_id;
    std::string subject_id;
    BBox bbox; // the post-event footprint's box
    std::string post_footprint_id;
    std::optional<std::string> pre_footprint_id;

    friend bool operator==(const ObjectRecord&, const ObjectRecord&) = default;
};

struct PrePostMatch {
    std::string pre_id;
    std::string post_id;
    double iou = 0.0;

    friend bool operator==(const PrePostMatch&, const PrePostMatch&) = default;
};

inline constexpr double kDefaultMatchIou = 0.1;

/// Greedy one-to-one association of pre- and post-event footprints of the
/// same subject: candidate pairs are taken by descending IoU (ties by the
/// unordered id pair) and accepted when both sides are free and IoU >= min_iou.
/// Output is ordered by acceptance.
[[nodiscard]] std::vector<PrePostMatch> associate_pre_post(std::span<const Footprint> pre,
                                                           std::span<const Footprint> post, double min_iou);

/// One object per post-event footprint, linked to its matched pre-event footprint.
[[nodiscard]] std::vector<ObjectRecord> make_objects(std::span<const Footprint> post,
                                                     std::span<const PrePostMatch> matches = {});

struct MarkAssignment {
    std::map<std::string, std::vector<Mark>> by_object;
    std::vector<Mark> unassigned;
};

/// Each mark goes to the smallest-area box of its subject that contains it;
/// failing that, to the nearest box within `radius` (boundary distance);
/// otherwise it is reported as unassigned. Area and distance ties go to the
/// earlier object.
[[nodiscard]] MarkAssignment assign_marks(std::span<const Mark> marks, std::span<const ObjectRecord> objects,
                                          double radius);

/// All marks of all classifications, in order.
[[nodiscard]] std::vector<Mark> collect_marks(std::span<const Classification> classifications);

/// Sparse objects x volunteers table. Each object's row stores only the
/// non-Unseen cells, sorted by volunteer index.
class LabelMatrix {
public:
    struct Entry {
        std::size_t volunteer = 0;
        ResponseLabel label = ResponseLabel::Empty;

        friend bool operator==(const Entry&, const Entry&) = default;
    };

    LabelMatrix() = default;
    LabelMatrix(std::vector<std::string> object_ids, std::vector<std::string> object_subjects,
                std::vector<std::string> volunteer_ids);

    /// Sets cell (object, volunteer); throws on out-of-range indices or a second write.
    void set(std::size_t object, std::size_t volunteer, ResponseLabel label);

    [[nodiscard]] CellValue cell(std::size_t object, std::size_t volunteer) const;
    [[nodiscard]] std::span<const Entry> row(std::size_t object) const { return rows_.at(object); }

    [[nodiscard]] std::size_t num_objects() const noexcept { return object_ids_.size(); }
    [[nodiscard]] std::size_t num_volunteers() const noexcept { return volunteer_ids_.size(); }
    [[nodiscard]] std::size_t num_responses() const noexcept;

    [[nodiscard]] const std::vector<std::string>& object_ids() const noexcept { return object_ids_; }
    [[nodiscard]] const std::vector<std::string>& object_subjects() const noexcept { return object_subjects_; }
    [[nodiscard]] const std::vector<std::string>& volunteer_ids() const noexcept { return volunteer_ids_; }

    /// Matrix with objects and volunteers reordered: new object i is old
    /// object object_order[i], likewise for volunteers.
    [[nodiscard]] LabelMatrix permuted(std::span<const std::size_t> object_order,
                                       std::span<const std::size_t> volunteer_order) const;

    friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

private:
    std::vector<std::string> object_ids_;
    std::vector<std::string> object_subjects_;
    std::vector<std::string> volunteer_ids_;
    std::vector<std::vector<Entry>> rows_;
};

/// Cell (i, k) for object i of subject m: Unseen when volunteer k has no
/// classification of m; else the highest severity among k's marks assigned to
/// i; else Empty. Volunteers are ordered by id; objects keep their order.
[[nodiscard]] LabelMatrix build_matrix(std::span<const Classification> classifications,
                                       std::span<const ObjectRecord> objects, const MarkAssignment& assignment);

/// CSV: header `object_id,<volunteer ids...>`, cells U/E/1/2/3.
[[nodiscard]] std::string matrix_to_csv(const LabelMatrix& matrix);
/// Inverse of matrix_to_csv. Object subjects are unknown in this format and
/// come back empty.
[[nodiscard]] LabelMatrix matrix_from_csv(std::string_view csv);

} // namespace crowdmark
