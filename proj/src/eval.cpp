#include "crowdmark/eval.hpp"

#include "crowdmark/errors.hpp"
#include "crowdmark/geojson.hpp"
#include "crowdmark/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <tuple>

namespace crowdmark {

using nlohmann::json;

std::vector<std::size_t> detection_order(std::span<const Detection> dets) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto key = [&](std::size_t i) {
        const Detection& d = dets[i];
        const int label = d.label ? static_cast<int>(index_of(*d.label)) : -1;
        return std::make_tuple(-d.score, std::string_view(d.subject_id), d.bbox.min_x, d.bbox.min_y, d.bbox.max_x,
                               d.bbox.max_y, label);
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    return order;
}

namespace {

bool same_class(const Detection& d, const ExpertLabel& g, bool class_aware) {
    return !class_aware || (d.label && *d.label == g.label);
}

void validate_detections(std::span<const Detection> dets) {
    for (const Detection& d : dets) {
        if (!d.bbox.valid() || !(d.score >= 0.0 && d.score <= 1.0)) {
            throw ValidationError("detection needs a valid box and a score in [0,1]");
        }
    }
}

} // namespace

MatchResult match_detections(std::span<const Detection> dets, std::span<const ExpertLabel> gts, double iou_thresh,
                             bool class_aware) {
    if (!(iou_thresh >= 0.0 && iou_thresh <= 1.0)) {
        throw InvalidParameter("IoU threshold must lie in [0,1]");
    }
    validate_detections(dets);
    MatchResult out;
    out.order = detection_order(dets);
    out.det_tp.assign(dets.size(), false);
    out.det_gt.assign(dets.size(), std::nullopt);
    out.gt_matched.assign(gts.size(), false);

    for (std::size_t d : out.order) {
        std::optional<std::size_t> best;
        double best_iou = iou_thresh;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (out.gt_matched[g] || gts[g].subject_id != dets[d].subject_id || !same_class(dets[d], gts[g], class_aware)) {
                continue;
            }
            const double v = iou(dets[d].bbox, gts[g].bbox);
            if (v >= best_iou && (!best || v > best_iou)) {
                best = g;
                best_iou = v;
            }
        }
        if (best) {
            out.gt_matched[*best] = true;
            out.det_tp[d] = true;
            out.det_gt[d] = best;
        }
    }
    return out;
}

VocMetrics voc_metrics(const MatchResult& match) {
    VocMetrics m;
    const std::size_t n_gt = match.gt_matched.size();
    const std::size_t n_det = match.order.size();
    m.tp = static_cast<std::size_t>(std::count(match.det_tp.begin(), match.det_tp.end(), true));
    m.fp = n_det - m.tp;
    m.fn = n_gt - m.tp;

    if (n_det == 0 && n_gt == 0) {
        m.precision = m.recall = m.f1 = m.ap = m.curve.ap = 100.0;
        return m;
    }
    m.precision = n_det > 0 ? 100.0 * static_cast<double>(m.tp) / static_cast<double>(n_det) : 0.0;
    m.recall = n_gt > 0 ? 100.0 * static_cast<double>(m.tp) / static_cast<double>(n_gt) : 100.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    if (n_gt == 0) {
        m.ap = m.curve.ap = 0.0;
        return m;
    }

    std::size_t tp = 0;
    std::size_t seen = 0;
    for (std::size_t d : match.order) {
        ++seen;
        tp += match.det_tp[d] ? 1 : 0;
        m.curve.points.emplace_back(static_cast<double>(tp) / static_cast<double>(n_gt),
                                    static_cast<double>(tp) / static_cast<double>(seen));
    }

    // All-point interpolation: area under the monotone precision envelope.
    std::vector<double> mrec{0.0};
    std::vector<double> mpre{0.0};
    for (const auto& [r, p] : m.curve.points) {
        mrec.push_back(r);
        mpre.push_back(p);
    }
    mrec.push_back(1.0);
    mpre.push_back(0.0);
    for (std::size_t i = mpre.size() - 1; i-- > 0;) {
        mpre[i] = std::max(mpre[i], mpre[i + 1]);
    }
    double ap = 0.0;
    for (std::size_t i = 0; i + 1 < mrec.size(); ++i) {
        if (mrec[i + 1] != mrec[i]) {
            ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
        }
    }
    m.ap = m.curve.ap = 100.0 * ap;
    return m;
}

F1Report classification_f1(const std::map<std::string, ResponseLabel>& predicted,
                           const std::map<std::string, ResponseLabel>& truth) {
    if (predicted.size() != truth.size() ||
        !std::equal(predicted.begin(), predicted.end(), truth.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
        throw ValidationError("predicted and true label maps cover different objects");
    }
    std::array<std::size_t, kNumClasses> tp{}, fp{}, fn{};
    F1Report report;
    for (auto p = predicted.begin(), t = truth.begin(); p != predicted.end(); ++p, ++t) {
        const std::size_t pi = index_of(p->second);
        const std::size_t ti = index_of(t->second);
        ++report.classes[ti].support;
        if (pi == ti) {
            ++tp[pi];
        } else {
            ++fp[pi];
            ++fn[ti];
        }
    }
    double weighted = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        ClassF1& r = report.classes[c];
        const auto tpc = static_cast<double>(tp[c]);
        const double denom = 2.0 * tpc + static_cast<double>(fp[c] + fn[c]);
        r.f1 = denom > 0.0 ? 100.0 * 2.0 * tpc / denom : 100.0;
        r.precision = tp[c] + fp[c] > 0 ? 100.0 * tpc / static_cast<double>(tp[c] + fp[c]) : 0.0;
        r.recall = r.support > 0 ? 100.0 * tpc / static_cast<double>(r.support) : 0.0;
        report.total_support += r.support;
        weighted += r.f1 * static_cast<double>(r.support);
    }
    report.weighted_f1 = report.total_support > 0 ? weighted / static_cast<double>(report.total_support) : 100.0;
    return report;
}

std::array<double, 10> coco_iou_thresholds() noexcept {
    std::array<double, 10> t{};
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<double>(50 + 5 * i) / 100.0;
    }
    return t;
}

namespace {

enum class AreaRange { All, Small, Medium, Large };

bool in_range(double area, AreaRange r, const CocoParams& p) {
    switch (r) {
    case AreaRange::All: return true;
    case AreaRange::Small: return area < p.small_max_area;
    case AreaRange::Medium: return area >= p.small_max_area && area < p.medium_max_area;
    case AreaRange::Large: return area >= p.medium_max_area;
    }
    return false;
}

// 101-point interpolated AP in [0,1] for detections already in processing
// order, given the pairwise IoU table (-1 where subjects differ).
double interpolated_ap(const std::vector<std::vector<double>>& ious, std::size_t n_gt, double thresh) {
    const std::size_t n_det = ious.size();
    std::vector<bool> gt_used(n_gt, false);
    std::vector<double> rc(n_det);
    std::vector<double> pr(n_det);
    std::size_t tp = 0;
    for (std::size_t d = 0; d < n_det; ++d) {
        std::optional<std::size_t> best;
        double best_iou = thresh;
        for (std::size_t g = 0; g < n_gt; ++g) {
            if (gt_used[g]) {
                continue;
            }
            const double v = ious[d][g];
            if (v >= best_iou && (!best || v > best_iou)) {
                best = g;
                best_iou = v;
            }
        }
        if (best) {
            gt_used[*best] = true;
            ++tp;
        }
        rc[d] = static_cast<double>(tp) / static_cast<double>(n_gt);
        pr[d] = static_cast<double>(tp) / static_cast<double>(d + 1);
    }
    for (std::size_t i = n_det; i-- > 1;) {
        pr[i - 1] = std::max(pr[i - 1], pr[i]);
    }
    double sum = 0.0;
    for (std::size_t r = 0; r <= 100; ++r) {
        const double level = static_cast<double>(r) * 0.01;
        const auto it = std::lower_bound(rc.begin(), rc.end(), level);
        if (it != rc.end()) {
            sum += pr[static_cast<std::size_t>(it - rc.begin())];
        }
    }
    return sum / 101.0;
}

double mean_valid(const std::vector<double>& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (x > -1.0) {
            sum += x;
            ++n;
        }
    }
    return n > 0 ? 100.0 * sum / static_cast<double>(n) : -1.0;
}

} // namespace

CocoReport coco_ap(std::span<const Detection> dets, std::span<const ExpertLabel> gts, bool class_aware,
                   const CocoParams& params) {
    validate_detections(dets);
    if (!(params.small_max_area > 0.0 && params.medium_max_area > params.small_max_area)) {
        throw InvalidParameter("area buckets need 0 < small_max_area < medium_max_area");
    }
    const auto thresholds = coco_iou_thresholds();
    const std::vector<std::size_t> order = detection_order(dets);

    std::vector<std::optional<ResponseLabel>> categories;
    if (class_aware) {
        std::set<std::size_t> present;
        for (const ExpertLabel& g : gts) {
            present.insert(index_of(g.label));
        }
        for (std::size_t c : present) {
            categories.emplace_back(label_at(c));
        }
    } else {
        categories.emplace_back(std::nullopt);
    }

    constexpr std::array<AreaRange, 4> ranges{AreaRange::All, AreaRange::Small, AreaRange::Medium, AreaRange::Large};
    // ap[range][threshold] -> per-category values, -1 when the category has no ground truth there
    std::array<std::array<std::vector<double>, 10>, 4> ap{};

    for (const auto& category : categories) {
        for (std::size_t r = 0; r < ranges.size(); ++r) {
            std::vector<std::size_t> g_sel;
            for (std::size_t g = 0; g < gts.size(); ++g) {
                if ((!category || gts[g].label == *category) && in_range(gts[g].bbox.area(), ranges[r], params)) {
                    g_sel.push_back(g);
                }
            }
            std::vector<std::size_t> d_sel;
            for (std::size_t d : order) {
                if ((!category || dets[d].label == category) && in_range(dets[d].bbox.area(), ranges[r], params)) {
                    d_sel.push_back(d);
                }
            }
            if (g_sel.empty()) {
                for (auto& per_t : ap[r]) {
                    per_t.push_back(-1.0);
                }
                continue;
            }
            std::vector<std::vector<double>> ious(d_sel.size(), std::vector<double>(g_sel.size(), -1.0));
            for (std::size_t i = 0; i < d_sel.size(); ++i) {
                for (std::size_t j = 0; j < g_sel.size(); ++j) {
                    if (dets[d_sel[i]].subject_id == gts[g_sel[j]].subject_id) {
                        ious[i][j] = iou(dets[d_sel[i]].bbox, gts[g_sel[j]].bbox);
                    }
                }
            }
            for (std::size_t t = 0; t < thresholds.size(); ++t) {
                ap[r][t].push_back(interpolated_ap(ious, g_sel.size(), thresholds[t]));
            }
        }
    }

    const auto flatten = [&](std::size_t r) {
        std::vector<double> all;
        for (const auto& per_t : ap[r]) {
            all.insert(all.end(), per_t.begin(), per_t.end());
        }
        return all;
    };
    CocoReport report;
    report.ap = mean_valid(flatten(0));
    report.ap50 = mean_valid(ap[0][0]);
    report.ap75 = mean_valid(ap[0][5]);
    report.ap_small = mean_valid(flatten(1));
    report.ap_medium = mean_valid(flatten(2));
    report.ap_large = mean_valid(flatten(3));
    return report;
}

// ---------------------------------------------------------------------------

std::vector<Detection> load_detections(const std::filesystem::path& path) {
    const std::string text = io::read_text_file(path);
    const auto ext = path.extension().string();
    std::vector<Detection> out;
    if (ext == ".geojson" || ext == ".json") {
        const json doc = geojson::parse(text, "detections");
        const json& features = geojson::features(doc, "detections");
        for (std::size_t i = 0; i < features.size(); ++i) {
            const std::size_t row = i + 1;
            const json props = features[i].value("properties", json::object());
            Detection d;
            d.bbox = polygon_envelope(geojson::polygon_from_feature(features[i], row));
            if (!props.is_object() || !props.contains("subject_id") || !props["subject_id"].is_string()) {
                throw ValidationError("detection lacks a subject_id", row);
            }
            d.subject_id = props["subject_id"].get<std::string>();
            for (const char* key : {"label", "hard_label"}) {
                if (props.contains(key) && props[key].is_string()) {
                    const auto l = parse_response_label(props[key].get<std::string>());
                    if (!l) {
                        throw ValidationError("unknown label '" + props[key].get<std::string>() + "'", row);
                    }
                    d.label = l;
                    break;
                }
            }
            if (props.contains("score") && props["score"].is_number()) {
                d.score = props["score"].get<double>();
            } else if (d.label && props.contains("p_" + std::string(to_string(*d.label)))) {
                d.score = props["p_" + std::string(to_string(*d.label))].get<double>();
            }
            if (!(d.score >= 0.0 && d.score <= 1.0)) {
                throw ValidationError("score must lie in [0,1]", row);
            }
            out.push_back(std::move(d));
        }
        return out;
    }

    const io::CsvTable table = io::parse_csv(text);
    io::require_header(table, {"subject_id", "min_x", "min_y", "max_x", "max_y", "label", "score"}, "detections");
    for (const io::CsvRow& row : table.rows) {
        if (row.fields.size() != 7) {
            throw ValidationError("expected 7 fields", row.line);
        }
        Detection d;
        d.subject_id = row.fields[0];
        d.bbox = {io::parse_double(row.fields[1], row.line, "min_x"), io::parse_double(row.fields[2], row.line, "min_y"),
                  io::parse_double(row.fields[3], row.line, "max_x"), io::parse_double(row.fields[4], row.line, "max_y")};
        if (!d.bbox.valid()) {
            throw ValidationError("bounding box has min greater than max", row.line);
        }
        if (!row.fields[5].empty()) {
            d.label = parse_response_label(row.fields[5]);
            if (!d.label) {
                throw ValidationError("unknown label '" + row.fields[5] + "'", row.line);
            }
        }
        d.score = io::parse_double(row.fields[6], row.line, "score");
        if (!(d.score >= 0.0 && d.score <= 1.0)) {
            throw ValidationError("score must lie in [0,1]", row.line);
        }
        out.push_back(std::move(d));
    }
    return out;
}

std::map<std::string, ResponseLabel> parse_label_map(std::string_view csv) {
    const io::CsvTable table = io::parse_csv(csv);
    const auto find = [&](std::string_view name) { return std::find(table.header.begin(), table.header.end(), name); };
    const auto id_it = find("object_id");
    auto label_it = find("label");
    if (label_it == table.header.end()) {
        label_it = find("hard_label");
    }
    if (id_it == table.header.end() || label_it == table.header.end()) {
        throw ValidationError("label map needs object_id and label (or hard_label) columns", 1);
    }
    const auto id_col = static_cast<std::size_t>(id_it - table.header.begin());
    const auto label_col = static_cast<std::size_t>(label_it - table.header.begin());
    std::map<std::string, ResponseLabel> out;
    for (const io::CsvRow& row : table.rows) {
        if (row.fields.size() != table.header.size()) {
            throw ValidationError("expected " + std::to_string(table.header.size()) + " fields", row.line);
        }
        const auto l = parse_response_label(row.fields[label_col]);
        if (!l) {
            throw ValidationError("unknown label '" + row.fields[label_col] + "'", row.line);
        }
        if (!out.emplace(row.fields[id_col], *l).second) {
            throw ValidationError("duplicate object id '" + row.fields[id_col] + "'", row.line);
        }
    }
    return out;
}

std::map<std::string, ResponseLabel> load_label_map(const std::filesystem::path& path) {
    return parse_label_map(io::read_text_file(path));
}

// ---------------------------------------------------------------------------

json to_json(const VocMetrics& m) {
    json curve = json::array();
    for (const auto& [r, p] : m.curve.points) {
        curve.push_back({r, p});
    }
    return {{"ap50", m.ap},   {"f1", m.f1}, {"precision", m.precision}, {"recall", m.recall},
            {"tp", m.tp},     {"fp", m.fp}, {"fn", m.fn},               {"pr_curve", curve}};
}

json to_json(const F1Report& r) {
    json classes = json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const ClassF1& x = r.classes[c];
        classes[std::string(to_string(label_at(c)))] = {
            {"f1", x.f1}, {"precision", x.precision}, {"recall", x.recall}, {"support", x.support}};
    }
    return {{"average", {{"f1", r.weighted_f1}, {"support", r.total_support}}}, {"classes", classes}};
}

json to_json(const CocoReport& r) {
    return {{"AP", r.ap},       {"AP50", r.ap50},       {"AP75", r.ap75},
            {"APs", r.ap_small}, {"APm", r.ap_medium}, {"APl", r.ap_large}};
}

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string render_table(const std::vector<std::vector<std::string>>& cells) {
    std::vector<std::size_t> widths;
    for (const auto& row : cells) {
        widths.resize(std::max(widths.size(), row.size()), 0);
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    std::string out;
    for (const auto& row : cells) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            line += row[c] + std::string(widths[c] - row[c].size(), ' ');
            if (c + 1 < row.size()) {
                line += "  ";
            }
        }
        while (!line.empty() && line.back() == ' ') {
            line.pop_back();
        }
        out += line + "\n";
    }
    return out;
}

} // namespace

std::string voc_table(std::span<const std::pair<std::string, VocMetrics>> rows) {
    std::vector<std::vector<std::string>> cells{{"Timestamp", "AP50", "F1", "Precision", "Recall"}};
    for (const auto& [name, m] : rows) {
        cells.push_back({name, fixed(m.ap, 0), fixed(m.f1, 0), fixed(m.precision, 0), fixed(m.recall, 0)});
    }
    return render_table(cells);
}

std::string f1_table(std::span<const std::pair<std::string, F1Report>> rows) {
    std::vector<std::vector<std::string>> cells;
    if (rows.empty()) {
        return {};
    }
    // Supports come from the ground truth and are shared by every row.
    const F1Report& first = rows.front().second;
    std::vector<std::string> header{"Model", "average / " + std::to_string(first.total_support)};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        header.push_back(std::string(to_string(label_at(c))) + " / " + std::to_string(first.classes[c].support));
    }
    cells.push_back(header);
    for (const auto& [name, r] : rows) {
        std::vector<std::string> row{name, fixed(r.weighted_f1, 0)};
        for (const ClassF1& c : r.classes) {
            row.push_back(c.support > 0 ? fixed(c.f1, 0) : "-");
        }
        cells.push_back(row);
    }
    return render_table(cells);
}

std::string coco_table(std::span<const std::pair<std::string, CocoReport>> rows) {
    std::vector<std::vector<std::string>> cells{{"", "AP", "AP50", "AP75", "APs", "APm", "APl"}};
    for (const auto& [name, r] : rows) {
        cells.push_back({name, fixed(r.ap, 3), fixed(r.ap50, 3), fixed(r.ap75, 3), fixed(r.ap_small, 3),
                         fixed(r.ap_medium, 3), fixed(r.ap_large, 3)});
    }
    return render_table(cells);
}

} // namespace crowdmark
