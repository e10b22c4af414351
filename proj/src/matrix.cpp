#include "crowdmark/matrix.hpp"

#include "crowdmark/errors.hpp"
#include "crowdmark/io.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <unordered_map>

namespace crowdmark {

std::vector<PrePostMatch> associate_pre_post(std::span<const Footprint> pre, std::span<const Footprint> post,
                                             double min_iou) {
    if (!(min_iou > 0.0 && min_iou <= 1.0)) {
        throw InvalidParameter("match IoU threshold must lie in (0,1]");
    }
    struct Candidate {
        std::size_t pre;
        std::size_t post;
        double iou;
        std::pair<std::string_view, std::string_view> key; // unordered id pair
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < pre.size(); ++i) {
        for (std::size_t j = 0; j < post.size(); ++j) {
            if (pre[i].subject_id != post[j].subject_id) {
                continue;
            }
            const double v = iou(pre[i].bbox, post[j].bbox);
            if (v >= min_iou) {
                const std::string_view a = pre[i].id;
                const std::string_view b = post[j].id;
                candidates.push_back({i, j, v, std::minmax(a, b)});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        if (x.iou != y.iou) {
            return x.iou > y.iou;
        }
        return x.key < y.key;
    });

    std::vector<bool> pre_used(pre.size(), false);
    std::vector<bool> post_used(post.size(), false);
    std::vector<PrePostMatch> out;
    for (const Candidate& c : candidates) {
        if (pre_used[c.pre] || post_used[c.post]) {
            continue;
        }
        pre_used[c.pre] = true;
        post_used[c.post] = true;
        out.push_back({pre[c.pre].id, post[c.post].id, c.iou});
    }
    return out;
}

std::vector<ObjectRecord> make_objects(std::span<const Footprint> post, std::span<const PrePostMatch> matches) {
    std::unordered_map<std::string_view, std::string_view> pre_of;
    for (const PrePostMatch& m : matches) {
        pre_of.emplace(m.post_id, m.pre_id);
    }
    std::vector<ObjectRecord> out;
    out.reserve(post.size());
    for (const Footprint& fp : post) {
        ObjectRecord rec{fp.id, fp.subject_id, fp.bbox, fp.id, std::nullopt};
        if (const auto it = pre_of.find(fp.id); it != pre_of.end()) {
            rec.pre_footprint_id = std::string(it->second);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

MarkAssignment assign_marks(std::span<const Mark> marks, std::span<const ObjectRecord> objects, double radius) {
    if (!(radius >= 0.0)) {
        throw InvalidParameter("mark radius must be non-negative");
    }
    std::unordered_map<std::string_view, std::vector<std::size_t>> by_subject;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        by_subject[objects[i].subject_id].push_back(i);
    }

    MarkAssignment out;
    for (const Mark& mark : marks) {
        const auto it = by_subject.find(mark.subject_id);
        std::optional<std::size_t> best;
        if (it != by_subject.end()) {
            double best_area = std::numeric_limits<double>::infinity();
            for (std::size_t i : it->second) {
                const BBox& box = objects[i].bbox;
                if (contains(box, mark.point) && box.area() < best_area) {
                    best = i;
                    best_area = box.area();
                }
            }
            if (!best && radius > 0.0) {
                double best_dist = std::numeric_limits<double>::infinity();
                for (std::size_t i : it->second) {
                    const double d = boundary_distance(objects[i].bbox, mark.point);
                    if (d <= radius && d < best_dist) {
                        best = i;
                        best_dist = d;
                    }
                }
            }
        }
        if (best) {
            out.by_object[objects[*best].object_id].push_back(mark);
        } else {
            out.unassigned.push_back(mark);
        }
    }
    return out;
}

std::vector<Mark> collect_marks(std::span<const Classification> classifications) {
    std::vector<Mark> out;
    for (const Classification& c : classifications) {
        out.insert(out.end(), c.marks.begin(), c.marks.end());
    }
    return out;
}

LabelMatrix::LabelMatrix(std::vector<std::string> object_ids, std::vector<std::string> object_subjects,
                         std::vector<std::string> volunteer_ids)
    : object_ids_(std::move(object_ids)), object_subjects_(std::move(object_subjects)),
      volunteer_ids_(std::move(volunteer_ids)), rows_(object_ids_.size()) {
    if (object_subjects_.size() != object_ids_.size()) {
        throw ValidationError("every object needs exactly one subject");
    }
}

void LabelMatrix::set(std::size_t object, std::size_t volunteer, ResponseLabel label) {
    if (object >= num_objects() || volunteer >= num_volunteers()) {
        throw ValidationError("matrix index out of range");
    }
    auto& r = rows_[object];
    const auto pos = std::lower_bound(r.begin(), r.end(), volunteer,
                                      [](const Entry& e, std::size_t v) { return e.volunteer < v; });
    if (pos != r.end() && pos->volunteer == volunteer) {
        throw ValidationError("cell (" + object_ids_[object] + ", " + volunteer_ids_[volunteer] + ") already set");
    }
    r.insert(pos, Entry{volunteer, label});
}

CellValue LabelMatrix::cell(std::size_t object, std::size_t volunteer) const {
    const auto& r = rows_.at(object);
    const auto pos = std::lower_bound(r.begin(), r.end(), volunteer,
                                      [](const Entry& e, std::size_t v) { return e.volunteer < v; });
    if (pos != r.end() && pos->volunteer == volunteer) {
        return pos->label;
    }
    return std::nullopt;
}

std::size_t LabelMatrix::num_responses() const noexcept {
    std::size_t n = 0;
    for (const auto& r : rows_) {
        n += r.size();
    }
    return n;
}

LabelMatrix LabelMatrix::permuted(std::span<const std::size_t> object_order,
                                  std::span<const std::size_t> volunteer_order) const {
    if (object_order.size() != num_objects() || volunteer_order.size() != num_volunteers()) {
        throw ValidationError("permutation size mismatch");
    }
    std::vector<std::size_t> new_volunteer(num_volunteers());
    std::vector<std::string> objects;
    std::vector<std::string> subjects;
    std::vector<std::string> volunteers;
    for (std::size_t k = 0; k < volunteer_order.size(); ++k) {
        new_volunteer.at(volunteer_order[k]) = k;
        volunteers.push_back(volunteer_ids_.at(volunteer_order[k]));
    }
    for (std::size_t i : object_order) {
        objects.push_back(object_ids_.at(i));
        subjects.push_back(object_subjects_.at(i));
    }
    LabelMatrix out(std::move(objects), std::move(subjects), std::move(volunteers));
    for (std::size_t i = 0; i < object_order.size(); ++i) {
        for (const Entry& e : rows_[object_order[i]]) {
            out.set(i, new_volunteer[e.volunteer], e.label);
        }
    }
    return out;
}

LabelMatrix build_matrix(std::span<const Classification> classifications, std::span<const ObjectRecord> objects,
                         const MarkAssignment& assignment) {
    std::set<std::string> volunteer_set;
    std::set<std::pair<std::string_view, std::string_view>> seen; // (volunteer, subject)
    for (const Classification& c : classifications) {
        volunteer_set.insert(c.volunteer_id);
        seen.emplace(c.volunteer_id, c.subject_id);
    }
    std::vector<std::string> volunteers(volunteer_set.begin(), volunteer_set.end());
    std::unordered_map<std::string_view, std::size_t> volunteer_index;
    for (std::size_t k = 0; k < volunteers.size(); ++k) {
        volunteer_index.emplace(volunteers[k], k);
    }

    std::unordered_map<std::string_view, std::size_t> object_index;
    std::vector<std::string> ids;
    std::vector<std::string> subjects;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (!object_index.emplace(objects[i].object_id, i).second) {
            throw ValidationError("duplicate object id '" + objects[i].object_id + "'");
        }
        ids.push_back(objects[i].object_id);
        subjects.push_back(objects[i].subject_id);
    }

    // Highest severity per (object, volunteer) among assigned marks.
    std::vector<std::map<std::size_t, ResponseLabel>> marked(objects.size());
    for (const auto& [object_id, marks] : assignment.by_object) {
        const auto oit = object_index.find(object_id);
        if (oit == object_index.end()) {
            throw ValidationError("mark assignment references unknown object '" + object_id + "'");
        }
        const ObjectRecord& obj = objects[oit->second];
        for (const Mark& m : marks) {
            if (m.subject_id != obj.subject_id) {
                throw ValidationError("mark of subject '" + m.subject_id + "' assigned to object '" + object_id +
                                      "' of subject '" + obj.subject_id + "'");
            }
            const auto vit = volunteer_index.find(m.volunteer_id);
            if (vit == volunteer_index.end()) {
                throw ValidationError("mark from volunteer '" + m.volunteer_id + "' has no classification");
            }
            const ResponseLabel l = to_response(m.severity);
            auto [pos, inserted] = marked[oit->second].try_emplace(vit->second, l);
            if (!inserted && index_of(l) > index_of(pos->second)) {
                pos->second = l;
            }
        }
    }

    std::unordered_map<std::string_view, std::vector<std::size_t>> subject_viewers;
    for (const auto& [volunteer, subject] : seen) {
        subject_viewers[subject].push_back(volunteer_index.at(volunteer));
    }

    LabelMatrix matrix(std::move(ids), std::move(subjects), std::move(volunteers));
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto vit = subject_viewers.find(objects[i].subject_id);
        if (vit == subject_viewers.end()) {
            continue;
        }
        for (std::size_t k : vit->second) {
            const auto mit = marked[i].find(k);
            matrix.set(i, k, mit != marked[i].end() ? mit->second : ResponseLabel::Empty);
        }
    }
    return matrix;
}

namespace {

char cell_code(CellValue v) {
    if (!v) {
        return 'U';
    }
    return *v == ResponseLabel::Empty ? 'E' : static_cast<char>('0' + index_of(*v));
}

} // namespace

std::string matrix_to_csv(const LabelMatrix& matrix) {
    std::string out = "object_id";
    for (const auto& v : matrix.volunteer_ids()) {
        out += "," + io::csv_escape(v);
    }
    out += "\n";
    for (std::size_t i = 0; i < matrix.num_objects(); ++i) {
        out += io::csv_escape(matrix.object_ids()[i]);
        for (std::size_t k = 0; k < matrix.num_volunteers(); ++k) {
            out += ',';
            out += cell_code(matrix.cell(i, k));
        }
        out += "\n";
    }
    return out;
}

LabelMatrix matrix_from_csv(std::string_view csv) {
    const io::CsvTable table = io::parse_csv(csv);
    if (table.header.empty() || table.header.front() != "object_id") {
        throw ValidationError("label matrix: header must start with 'object_id'", 1);
    }
    std::vector<std::string> volunteers(table.header.begin() + 1, table.header.end());
    std::vector<std::string> objects;
    for (const io::CsvRow& row : table.rows) {
        objects.push_back(row.fields.front());
    }
    LabelMatrix matrix(objects, std::vector<std::string>(objects.size()), std::move(volunteers));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const io::CsvRow& row = table.rows[i];
        if (row.fields.size() != table.header.size()) {
            throw ValidationError("expected " + std::to_string(table.header.size()) + " fields", row.line);
        }
        for (std::size_t k = 1; k < row.fields.size(); ++k) {
            const std::string& code = row.fields[k];
            if (code == "U") {
                continue;
            }
            if (code == "E") {
                matrix.set(i, k - 1, ResponseLabel::Empty);
            } else if (code == "1" || code == "2" || code == "3") {
                matrix.set(i, k - 1, label_at(static_cast<std::size_t>(code[0] - '0')));
            } else {
                throw ValidationError("unknown cell code '" + code + "'", row.line);
            }
        }
    }
    return matrix;
}

} // namespace crowdmark
