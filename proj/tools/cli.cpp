#include "cli.hpp"

#include "crowdmark/errors.hpp"
#include "crowdmark/io.hpp"
#include "crowdmark/matrix.hpp"
#include "crowdmark/raster_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

namespace crowdmark::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

std::string key_name(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) {
        throw InvalidParameter("config " + (where.empty() ? std::string("root") : "'" + where + "'") +
                               " must be a JSON object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw InvalidParameter("unknown config key '" + key_name(where, it.key()) + "'");
        }
    }
}

double number_of(const json& v, const std::string& name) {
    if (!v.is_number()) {
        throw InvalidParameter("config key '" + name + "' must be a number");
    }
    return v.get<double>();
}

void read_number(const json& obj, const std::string& where, const char* key, double& dst) {
    if (obj.contains(key)) {
        dst = number_of(obj.at(key), key_name(where, key));
    }
}

template <typename T>
void read_unsigned(const json& obj, const std::string& where, const char* key, T& dst) {
    if (obj.contains(key)) {
        const json& v = obj.at(key);
        if (!v.is_number_unsigned()) {
            throw InvalidParameter("config key '" + key_name(where, key) + "' must be a non-negative integer");
        }
        dst = v.get<T>();
    }
}

void read_bool(const json& obj, const std::string& where, const char* key, bool& dst) {
    if (obj.contains(key)) {
        if (!obj.at(key).is_boolean()) {
            throw InvalidParameter("config key '" + key_name(where, key) + "' must be true or false");
        }
        dst = obj.at(key).get<bool>();
    }
}

std::string string_of(const json& v, const std::string& name) {
    if (!v.is_string()) {
        throw InvalidParameter("config key '" + name + "' must be a string");
    }
    return v.get<std::string>();
}

fs::path path_of(const json& v, const std::string& name, const fs::path& base) {
    const std::string s = string_of(v, name);
    if (s.empty()) {
        throw InvalidParameter("config key '" + name + "' must be a non-empty path");
    }
    const fs::path p(s);
    return (p.is_relative() ? base / p : p).lexically_normal();
}

ClassDist vec4_of(const json& v, const std::string& name) {
    if (!v.is_array() || v.size() != kNumClasses) {
        throw InvalidParameter("config key '" + name + "' must be an array of 4 numbers");
    }
    ClassDist out{};
    for (std::size_t j = 0; j < kNumClasses; ++j) {
        out[j] = number_of(v[j], name);
    }
    return out;
}

ConfusionMatrix mat4_of(const json& v, const std::string& name) {
    if (!v.is_array() || v.size() != kNumClasses) {
        throw InvalidParameter("config key '" + name + "' must be a 4x4 array");
    }
    ConfusionMatrix out{};
    for (std::size_t j = 0; j < kNumClasses; ++j) {
        out[j] = vec4_of(v[j], name);
    }
    return out;
}

Method parse_method(const std::string& s) {
    if (s == "mv") {
        return Method::MajorityVote;
    }
    if (s == "em") {
        return Method::Em;
    }
    if (s == "ibcc") {
        return Method::Ibcc;
    }
    throw InvalidParameter("unknown aggregation method '" + s + "' (expected mv, em or ibcc)");
}

std::string_view method_name(Method m) {
    switch (m) {
    case Method::MajorityVote:
        return "mv";
    case Method::Em:
        return "em";
    case Method::Ibcc:
        return "ibcc";
    }
    return "?";
}

EvalMode parse_mode(const std::string& s) {
    if (s == "detection") {
        return EvalMode::Detection;
    }
    if (s == "classification") {
        return EvalMode::Classification;
    }
    if (s == "coco") {
        return EvalMode::Coco;
    }
    throw InvalidParameter("unknown evaluation mode '" + s + "' (expected detection, classification or coco)");
}

SpammerKind parse_spammer_kind(const std::string& s) {
    if (s == "uniform") {
        return SpammerKind::Uniform;
    }
    if (s == "over-marking") {
        return SpammerKind::OverMarking;
    }
    throw InvalidParameter("unknown spammer kind '" + s + "' (expected uniform or over-marking)");
}

Phase phase_of(const std::string& s) {
    const auto p = parse_phase(s);
    if (!p) {
        throw InvalidParameter("unknown phase '" + s + "' (expected pre or post)");
    }
    return *p;
}

void parse_inputs(const json& obj, const fs::path& base, RunConfig& cfg) {
    const std::string where = "inputs";
    check_keys(obj, where, {"classifications", "footprints", "rasters", "predictions", "truth", "results"});
    if (obj.contains("classifications")) {
        cfg.classifications = path_of(obj.at("classifications"), "inputs.classifications", base);
    }
    if (obj.contains("footprints")) {
        const json& v = obj.at("footprints");
        cfg.footprints.clear();
        if (v.is_array()) {
            for (const json& p : v) {
                cfg.footprints.push_back(path_of(p, "inputs.footprints", base));
            }
        } else {
            cfg.footprints.push_back(path_of(v, "inputs.footprints", base));
        }
    }
    if (obj.contains("rasters")) {
        const json& v = obj.at("rasters");
        if (!v.is_array()) {
            throw InvalidParameter("config key 'inputs.rasters' must be an array");
        }
        cfg.rasters.clear();
        for (const json& r : v) {
            check_keys(r, "inputs.rasters[]", {"png", "geotransform", "subject_id", "phase"});
            for (const char* required : {"png", "geotransform", "subject_id"}) {
                if (!r.contains(required)) {
                    throw InvalidParameter(std::string("config key 'inputs.rasters[].") + required + "' is required");
                }
            }
            RasterInput in;
            in.png = path_of(r.at("png"), "inputs.rasters[].png", base);
            in.geotransform = path_of(r.at("geotransform"), "inputs.rasters[].geotransform", base);
            in.subject_id = string_of(r.at("subject_id"), "inputs.rasters[].subject_id");
            if (r.contains("phase")) {
                in.phase = phase_of(string_of(r.at("phase"), "inputs.rasters[].phase"));
            }
            cfg.rasters.push_back(std::move(in));
        }
    }
    if (obj.contains("predictions")) {
        cfg.predictions = path_of(obj.at("predictions"), "inputs.predictions", base);
    }
    if (obj.contains("truth")) {
        cfg.truth = path_of(obj.at("truth"), "inputs.truth", base);
    }
    if (obj.contains("results")) {
        cfg.results = path_of(obj.at("results"), "inputs.results", base);
    }
}

void parse_aggregate(const json& obj, RunConfig& cfg) {
    const std::string where = "aggregate";
    check_keys(obj, where, {"method", "match_iou", "mark_radius", "mv_weights", "ibcc", "em", "max_iters", "tol"});
    if (obj.contains("method")) {
        cfg.method = parse_method(string_of(obj.at("method"), "aggregate.method"));
    }
    read_number(obj, where, "match_iou", cfg.match_iou);
    read_number(obj, where, "mark_radius", cfg.mark_radius);
    read_unsigned(obj, where, "max_iters", cfg.max_iters);
    read_number(obj, where, "tol", cfg.tol);
    if (obj.contains("mv_weights")) {
        const json& w = obj.at("mv_weights");
        check_keys(w, "aggregate.mv_weights", {"empty", "minor", "significant", "catastrophic"});
        for (ResponseLabel l : kAllLabels) {
            read_number(w, "aggregate.mv_weights", std::string(to_string(l)).c_str(), cfg.mv_weights.weights[index_of(l)]);
        }
    }
    if (obj.contains("ibcc")) {
        const json& p = obj.at("ibcc");
        check_keys(p, "aggregate.ibcc", {"nu0", "alpha0", "per_volunteer"});
        if (p.contains("nu0")) {
            cfg.priors.nu0 = vec4_of(p.at("nu0"), "aggregate.ibcc.nu0");
        }
        if (p.contains("alpha0")) {
            cfg.priors.alpha0 = mat4_of(p.at("alpha0"), "aggregate.ibcc.alpha0");
        }
        if (p.contains("per_volunteer")) {
            const json& pv = p.at("per_volunteer");
            if (!pv.is_object()) {
                throw InvalidParameter("config key 'aggregate.ibcc.per_volunteer' must map volunteer ids to 4x4 arrays");
            }
            for (auto it = pv.begin(); it != pv.end(); ++it) {
                cfg.priors.per_volunteer[it.key()] = mat4_of(it.value(), "aggregate.ibcc.per_volunteer." + it.key());
            }
        }
    }
    if (obj.contains("em")) {
        const json& e = obj.at("em");
        check_keys(e, "aggregate.em", {"smoothing"});
        read_number(e, "aggregate.em", "smoothing", cfg.em_smoothing);
    }
}

void parse_evaluate(const json& obj, RunConfig& cfg) {
    const std::string where = "evaluate";
    check_keys(obj, where, {"mode", "iou", "class_aware", "name", "small_max_area", "medium_max_area"});
    if (obj.contains("mode")) {
        cfg.eval_mode = parse_mode(string_of(obj.at("mode"), "evaluate.mode"));
    }
    read_number(obj, where, "iou", cfg.eval_iou);
    read_bool(obj, where, "class_aware", cfg.class_aware);
    if (obj.contains("name")) {
        cfg.name = string_of(obj.at("name"), "evaluate.name");
    }
    read_number(obj, where, "small_max_area", cfg.coco.small_max_area);
    read_number(obj, where, "medium_max_area", cfg.coco.medium_max_area);
}

void parse_simulate(const json& obj, RunConfig& cfg) {
    const std::string where = "simulate";
    check_keys(obj, where,
               {"n_objects", "n_volunteers", "class_prior", "confusion", "spammer_fraction", "reliable_diagonal",
                "spammer_kind", "overmark_rate", "visibility", "objects_per_subject", "jitter",
                "duplicate_mark_rate"});
    SimConfig& sim = cfg.simulation;
    read_unsigned(obj, where, "n_objects", sim.n_objects);
    read_unsigned(obj, where, "n_volunteers", sim.n_volunteers);
    read_unsigned(obj, where, "objects_per_subject", sim.objects_per_subject);
    if (obj.contains("class_prior")) {
        sim.class_prior = vec4_of(obj.at("class_prior"), "simulate.class_prior");
    }
    if (obj.contains("confusion")) {
        const json& c = obj.at("confusion");
        if (!c.is_array()) {
            throw InvalidParameter("config key 'simulate.confusion' must be an array of 4x4 arrays");
        }
        sim.confusion.clear();
        for (const json& m : c) {
            sim.confusion.push_back(mat4_of(m, "simulate.confusion[]"));
        }
    }
    read_number(obj, where, "spammer_fraction", sim.spammer_fraction);
    read_number(obj, where, "reliable_diagonal", sim.reliable_diagonal);
    if (obj.contains("spammer_kind")) {
        sim.spammer_kind = parse_spammer_kind(string_of(obj.at("spammer_kind"), "simulate.spammer_kind"));
    }
    read_number(obj, where, "overmark_rate", sim.overmark_rate);
    read_number(obj, where, "visibility", sim.visibility);
    read_number(obj, where, "jitter", sim.jitter);
    read_number(obj, where, "duplicate_mark_rate", sim.duplicate_mark_rate);
}

// ---------------------------------------------------------------------------
// Command helpers

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw InvalidParameter(message);
    }
}

std::vector<fs::path> input_paths(const RunConfig& cfg) {
    std::vector<fs::path> out;
    for (const auto* p : {&cfg.classifications, &cfg.predictions, &cfg.truth, &cfg.results}) {
        if (*p) {
            out.push_back(**p);
        }
    }
    out.insert(out.end(), cfg.footprints.begin(), cfg.footprints.end());
    for (const RasterInput& r : cfg.rasters) {
        out.push_back(r.png);
        out.push_back(r.geotransform);
    }
    return out;
}

bool same_path(const fs::path& a, const fs::path& b) {
    std::error_code ec;
    return fs::weakly_canonical(a, ec) == fs::weakly_canonical(b, ec);
}

using OutputFiles = std::vector<std::pair<std::string, std::string>>;

/// Writes every file only after checking none of them would clobber an input.
void write_outputs(const RunConfig& cfg, const OutputFiles& files, std::ostream& log) {
    for (const auto& [name, _] : files) {
        for (const fs::path& in : input_paths(cfg)) {
            if (same_path(cfg.out / name, in)) {
                throw InvalidParameter("output '" + (cfg.out / name).string() + "' would overwrite an input");
            }
        }
    }
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + cfg.out.string() + "': " + ec.message());
    }
    for (const auto& [name, content] : files) {
        io::write_file_atomic(cfg.out / name, content);
        if (cfg.verbose) {
            log << "wrote " << (cfg.out / name).string() << "\n";
        }
    }
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

bool has_json_extension(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".geojson" || ext == ".json";
}

struct LoadedRaster {
    const RasterInput* input;
    ProbRaster raster;
};

std::vector<LoadedRaster> load_rasters(const RunConfig& cfg) {
    std::vector<LoadedRaster> out;
    for (const RasterInput& r : cfg.rasters) {
        out.push_back({&r, load_prob_raster(r.png, r.geotransform)});
    }
    return out;
}

std::vector<Footprint> footprints_at(const std::vector<LoadedRaster>& rasters, double theta, double min_area) {
    std::vector<Footprint> out;
    for (const LoadedRaster& r : rasters) {
        auto fps = footprints_from_raster(r.raster, theta, min_area, r.input->subject_id, r.input->phase);
        out.insert(out.end(), std::make_move_iterator(fps.begin()), std::make_move_iterator(fps.end()));
    }
    return out;
}

void check_unique_ids(const std::vector<Footprint>& fps) {
    std::set<std::string> seen;
    for (const Footprint& fp : fps) {
        if (!seen.insert(fp.id).second) {
            throw ValidationError("duplicate footprint id '" + fp.id + "' across inputs");
        }
    }
}

std::vector<Detection> as_detections(const std::vector<Footprint>& fps) {
    std::vector<Detection> out;
    out.reserve(fps.size());
    for (const Footprint& fp : fps) {
        out.push_back(Detection{fp.bbox, fp.subject_id, std::nullopt, fp.score.value_or(1.0)});
    }
    return out;
}

std::map<std::string, ResponseLabel> load_predicted_labels(const fs::path& path) {
    if (!has_json_extension(path)) {
        return load_label_map(path);
    }
    std::map<std::string, ResponseLabel> out;
    for (const ResultRecord& r : parse_results_geojson(io::read_text_file(path))) {
        if (!out.emplace(r.object_id, r.hard_label).second) {
            throw ValidationError("duplicate object id '" + r.object_id + "' in " + path.string());
        }
    }
    return out;
}

std::string fixed(double v, int decimals) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << v;
    return os.str();
}

} // namespace

// ---------------------------------------------------------------------------

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
    check_keys(doc, "",
               {"out", "inputs", "extract", "aggregate", "evaluate", "simulate", "sweep", "coco", "seed", "verbose"});
    RunConfig cfg;
    if (doc.contains("out")) {
        cfg.out = path_of(doc.at("out"), "out", base_dir);
    }
    if (doc.contains("inputs")) {
        parse_inputs(doc.at("inputs"), base_dir, cfg);
    }
    if (doc.contains("extract")) {
        const json& e = doc.at("extract");
        check_keys(e, "extract", {"threshold", "min_area"});
        read_number(e, "extract", "threshold", cfg.threshold);
        read_number(e, "extract", "min_area", cfg.min_area);
    }
    if (doc.contains("aggregate")) {
        parse_aggregate(doc.at("aggregate"), cfg);
    }
    if (doc.contains("evaluate")) {
        parse_evaluate(doc.at("evaluate"), cfg);
    }
    if (doc.contains("simulate")) {
        parse_simulate(doc.at("simulate"), cfg);
    }
    if (doc.contains("sweep")) {
        const json& s = doc.at("sweep");
        check_keys(s, "sweep", {"thresholds"});
        if (s.contains("thresholds")) {
            const json& t = s.at("thresholds");
            if (!t.is_array()) {
                throw InvalidParameter("config key 'sweep.thresholds' must be an array of numbers");
            }
            cfg.thresholds.clear();
            for (const json& v : t) {
                cfg.thresholds.push_back(number_of(v, "sweep.thresholds"));
            }
        }
    }
    if (doc.contains("coco")) {
        const json& c = doc.at("coco");
        check_keys(c, "coco", {"images"});
        if (c.contains("images")) {
            const json& images = c.at("images");
            if (!images.is_object()) {
                throw InvalidParameter("config key 'coco.images' must map subject ids to {width, height}");
            }
            for (auto it = images.begin(); it != images.end(); ++it) {
                const std::string where = "coco.images." + it.key();
                check_keys(it.value(), where, {"width", "height"});
                CocoImageSize size;
                read_unsigned(it.value(), where, "width", size.width);
                read_unsigned(it.value(), where, "height", size.height);
                require(size.width > 0 && size.height > 0, "config key '" + where + "' needs positive width and height");
                cfg.image_sizes[it.key()] = size;
            }
        }
    }
    read_unsigned(doc, "", "seed", cfg.seed);
    read_bool(doc, "", "verbose", cfg.verbose);
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    const std::string text = io::read_text_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidParameter("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

void validate(const RunConfig& cfg) {
    const auto finite = [](double v) { return std::isfinite(v); };
    require(!cfg.out.empty(), "output directory must be set");
    require(cfg.threshold >= 0.0 && cfg.threshold <= 1.0, "threshold must lie in [0, 1]");
    require(finite(cfg.min_area) && cfg.min_area >= 0.0, "min_area must be a non-negative number");
    require(cfg.match_iou > 0.0 && cfg.match_iou <= 1.0, "match_iou must lie in (0, 1]");
    require(finite(cfg.mark_radius) && cfg.mark_radius >= 0.0, "mark_radius must be a non-negative number");
    require(cfg.max_iters >= 1, "max_iters must be at least 1");
    require(finite(cfg.tol) && cfg.tol > 0.0, "tol must be positive");
    require(finite(cfg.em_smoothing) && cfg.em_smoothing > 0.0, "em smoothing must be positive");
    require(cfg.eval_iou > 0.0 && cfg.eval_iou <= 1.0, "evaluation iou must lie in (0, 1]");
    require(finite(cfg.coco.small_max_area) && finite(cfg.coco.medium_max_area) && cfg.coco.small_max_area > 0.0 &&
                cfg.coco.small_max_area < cfg.coco.medium_max_area,
            "COCO area buckets need 0 < small_max_area < medium_max_area");
    require(!cfg.thresholds.empty(), "threshold grid must not be empty");
    for (double t : cfg.thresholds) {
        require(t >= 0.0 && t <= 1.0, "every sweep threshold must lie in [0, 1]");
    }
    for (const RasterInput& r : cfg.rasters) {
        require(!r.subject_id.empty(), "every raster needs a subject id");
    }
    cfg.mv_weights.validate();
    cfg.priors.validate();
    SimConfig sim = cfg.simulation;
    sim.seed = cfg.seed;
    sim.validate();
    for (const fs::path& in : input_paths(cfg)) {
        require(!same_path(in, cfg.out), "input '" + in.string() + "' is the output directory");
    }
}

// ---------------------------------------------------------------------------
// Commands

void cmd_extract(const RunConfig& cfg, std::ostream& log) {
    require(!cfg.rasters.empty(), "extract needs at least one raster (inputs.rasters or --png)");
    std::vector<Footprint> all;
    for (const RasterInput& r : cfg.rasters) {
        auto fps = load_footprints_raster(r.png, r.geotransform, cfg.threshold, cfg.min_area, r.subject_id, r.phase);
        log << "subject " << r.subject_id << " (" << to_string(r.phase) << "): " << fps.size() << " components\n";
        all.insert(all.end(), std::make_move_iterator(fps.begin()), std::make_move_iterator(fps.end()));
    }
    check_unique_ids(all);
    log << "total: " << all.size() << " footprints\n";
    write_outputs(cfg, {{"footprints.geojson", footprints_to_geojson(all)}}, log);
}

void cmd_aggregate(const RunConfig& cfg, std::ostream& log) {
    require(cfg.classifications.has_value(), "aggregate needs classifications (inputs.classifications or --classifications)");
    require(!cfg.footprints.empty() || !cfg.rasters.empty(),
            "aggregate needs footprints (inputs.footprints, inputs.rasters or --footprints)");

    Diagnostics diag;
    const std::vector<Classification> classifications = load_classifications(*cfg.classifications, &diag);
    std::vector<Footprint> fps;
    for (const fs::path& p : cfg.footprints) {
        auto loaded = load_footprints_vector(p);
        fps.insert(fps.end(), std::make_move_iterator(loaded.begin()), std::make_move_iterator(loaded.end()));
    }
    {
        auto extracted = footprints_at(load_rasters(cfg), cfg.threshold, cfg.min_area);
        fps.insert(fps.end(), std::make_move_iterator(extracted.begin()), std::make_move_iterator(extracted.end()));
    }
    check_unique_ids(fps);

    std::vector<Footprint> pre;
    std::vector<Footprint> post;
    for (Footprint& fp : fps) {
        (fp.phase == Phase::Pre ? pre : post).push_back(std::move(fp));
    }
    const auto matches = pre.empty() ? std::vector<PrePostMatch>{} : associate_pre_post(pre, post, cfg.match_iou);
    const std::vector<ObjectRecord> objects = make_objects(post, matches);
    const std::vector<Mark> marks = collect_marks(classifications);
    const MarkAssignment assignment = assign_marks(marks, objects, cfg.mark_radius);
    const LabelMatrix matrix = build_matrix(classifications, objects, assignment);

    std::ostringstream conv;
    conv << "method " << method_name(cfg.method) << "\n"
         << "objects " << matrix.num_objects() << "\n"
         << "volunteers " << matrix.num_volunteers() << "\n"
         << "responses " << matrix.num_responses() << "\n"
         << "pre_post_matches " << matches.size() << "\n"
         << "unassigned_marks " << assignment.unassigned.size() << "\n";

    AggregationResult result;
    std::string volunteers = "[]\n";
    switch (cfg.method) {
    case Method::MajorityVote:
        result = majority_vote(matrix, cfg.mv_weights);
        break;
    case Method::Em: {
        EmResult em = dawid_skene_em(matrix, EmConfig{cfg.max_iters, cfg.tol, cfg.em_smoothing});
        volunteers = volunteer_matrices_to_json(matrix.volunteer_ids(), em.confusion, "confusion");
        result = std::move(em.result);
        break;
    }
    case Method::Ibcc: {
        VbConfig vb{cfg.max_iters, cfg.tol, [&conv](const VbSweep& s) {
                        conv << "iteration " << s.iteration << " delta " << io::format_double(s.delta) << "\n";
                    }};
        IbccResult ibcc = ibcc_vb(matrix, cfg.priors, vb);
        std::vector<ConfusionMatrix> alpha;
        for (const VolunteerPosterior& v : ibcc.volunteers) {
            alpha.push_back(v.alpha);
        }
        volunteers = volunteer_matrices_to_json(matrix.volunteer_ids(), alpha, "alpha");
        result = std::move(ibcc.result);
        break;
    }
    }
    conv << "iterations " << result.iterations << "\n"
         << "converged " << (result.converged ? "true" : "false") << "\n"
         << "final_delta " << io::format_double(result.final_delta) << "\n";
    for (const std::string& w : diag.warnings) {
        conv << "warning " << w << "\n";
    }
    for (const std::string& w : result.warnings) {
        conv << "warning " << w << "\n";
    }

    log << method_name(cfg.method) << ": " << matrix.num_objects() << " objects, " << matrix.num_volunteers()
        << " volunteers, " << matrix.num_responses() << " responses, " << assignment.unassigned.size()
        << " unassigned marks; " << result.iterations << " iterations"
        << (result.converged ? "" : " (not converged)") << "\n";
    if (cfg.verbose) {
        for (const std::string& w : diag.warnings) {
            log << "warning: " << w << "\n";
        }
        for (const std::string& w : result.warnings) {
            log << "warning: " << w << "\n";
        }
    }

    write_outputs(cfg,
                  {{"results.geojson", results_to_geojson(result, objects)},
                   {"results.csv", results_to_csv(result, objects)},
                   {"volunteers.json", volunteers},
                   {"matrix.csv", matrix_to_csv(matrix)},
                   {"convergence.log", conv.str()}},
                  log);
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
    require(cfg.predictions.has_value(), "evaluate needs predictions (inputs.predictions or --predictions)");
    require(cfg.truth.has_value(), "evaluate needs ground truth (inputs.truth or --truth)");
    const std::string name = cfg.name.empty() ? cfg.predictions->stem().string() : cfg.name;

    json report;
    std::string table;
    switch (cfg.eval_mode) {
    case EvalMode::Detection: {
        std::vector<Detection> dets = load_detections(*cfg.predictions);
        for (Detection& d : dets) {
            d.label.reset();
        }
        const std::vector<ExpertLabel> gts = load_expert_labels(*cfg.truth);
        const VocMetrics m = voc_metrics(match_detections(dets, gts, cfg.eval_iou, false));
        report = {{"mode", "detection"}, {"name", name}, {"iou", cfg.eval_iou}, {"metrics", to_json(m)}};
        const std::vector<std::pair<std::string, VocMetrics>> rows{{name, m}};
        table = voc_table(rows);
        break;
    }
    case EvalMode::Classification: {
        const F1Report r = classification_f1(load_predicted_labels(*cfg.predictions), load_label_map(*cfg.truth));
        report = {{"mode", "classification"}, {"name", name}, {"metrics", to_json(r)}};
        const std::vector<std::pair<std::string, F1Report>> rows{{name, r}};
        table = f1_table(rows);
        break;
    }
    case EvalMode::Coco: {
        std::vector<Detection> dets = load_detections(*cfg.predictions);
        if (!cfg.class_aware) {
            for (Detection& d : dets) {
                d.label.reset();
            }
        }
        const std::vector<ExpertLabel> gts = load_expert_labels(*cfg.truth);
        const CocoReport r = coco_ap(dets, gts, cfg.class_aware, cfg.coco);
        report = {{"mode", "coco"}, {"name", name}, {"class_aware", cfg.class_aware}, {"metrics", to_json(r)}};
        const std::vector<std::pair<std::string, CocoReport>> rows{{name, r}};
        table = coco_table(rows);
        break;
    }
    }
    log << table;
    write_outputs(cfg, {{"report.json", json_text(report)}, {"report.txt", table}}, log);
}

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    SimConfig sim = cfg.simulation;
    sim.seed = cfg.seed;
    const SimWorld world = generate(sim);
    log << "simulated " << world.objects.size() << " objects in " << world.subject_ids.size() << " subjects, "
        << world.volunteer_ids.size() << " volunteers, " << world.classifications.size()
        << " classifications (seed " << sim.seed << ")\n";
    write_outputs(cfg,
                  {{"classifications.csv", classifications_to_csv(world.classifications)},
                   {"footprints.geojson", footprints_to_geojson(world.footprints())},
                   {"truth.csv", truth_to_csv(world)}},
                  log);
}

void cmd_sweep_threshold(const RunConfig& cfg, std::ostream& log) {
    require(!cfg.rasters.empty(), "sweep-threshold needs at least one raster (inputs.rasters or --png)");
    require(cfg.truth.has_value(), "sweep-threshold needs expert boxes (inputs.truth or --truth)");
    const std::vector<LoadedRaster> rasters = load_rasters(cfg);
    const std::vector<ExpertLabel> gts = load_expert_labels(*cfg.truth);

    json rows = json::array();
    std::ostringstream table;
    table << std::left << std::setw(10) << "theta" << std::right << std::setw(12) << "footprints" << std::setw(8)
          << "F1" << std::setw(11) << "Precision" << std::setw(8) << "Recall" << std::setw(8) << "AP50" << "\n";
    std::size_t best = 0;
    double best_f1 = -1.0;
    for (std::size_t i = 0; i < cfg.thresholds.size(); ++i) {
        const double theta = cfg.thresholds[i];
        const std::vector<Footprint> fps = footprints_at(rasters, theta, cfg.min_area);
        const VocMetrics m = voc_metrics(match_detections(as_detections(fps), gts, cfg.eval_iou, false));
        if (m.f1 > best_f1) {
            best_f1 = m.f1;
            best = i;
        }
        rows.push_back({{"theta", theta},
                        {"footprints", fps.size()},
                        {"f1", m.f1},
                        {"precision", m.precision},
                        {"recall", m.recall},
                        {"ap50", m.ap}});
        table << std::left << std::setw(10) << io::format_double(theta) << std::right << std::setw(12) << fps.size()
              << std::setw(8) << fixed(m.f1, 0) << std::setw(11) << fixed(m.precision, 0) << std::setw(8)
              << fixed(m.recall, 0) << std::setw(8) << fixed(m.ap, 0) << "\n";
    }
    table << "best theta " << io::format_double(cfg.thresholds[best]) << " (F1 " << fixed(best_f1, 1) << ")\n";
    const json report{{"iou", cfg.eval_iou},
                      {"min_area", cfg.min_area},
                      {"rows", rows},
                      {"best_theta", cfg.thresholds[best]},
                      {"best_f1", best_f1}};
    log << table.str();
    write_outputs(cfg, {{"sweep.json", json_text(report)}, {"sweep.txt", table.str()}}, log);
}

void cmd_export_coco(const RunConfig& cfg, std::ostream& log) {
    require(cfg.results.has_value(), "export-coco needs aggregation results (inputs.results or --results)");
    const std::vector<ResultRecord> records = parse_results_geojson(io::read_text_file(*cfg.results));
    const json coco = to_coco_json(records, cfg.image_sizes);
    log << "exported " << coco.at("annotations").size() << " annotations on " << coco.at("images").size()
        << " images\n";
    write_outputs(cfg, {{"coco.json", json_text(coco)}}, log);
}

// ---------------------------------------------------------------------------

namespace {

struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    bool verbose = false;

    // inputs
    std::optional<std::string> classifications;
    std::vector<std::string> footprints;
    std::optional<std::string> png;
    std::optional<std::string> geotransform;
    std::optional<std::string> subject;
    std::optional<std::string> phase;
    std::optional<std::string> predictions;
    std::optional<std::string> truth;
    std::optional<std::string> results;

    std::optional<double> theta;
    std::optional<double> min_area;
    std::optional<std::string> method;
    std::optional<double> match_iou;
    std::optional<double> mark_radius;
    std::optional<double> empty_weight;
    std::optional<std::size_t> max_iters;
    std::optional<double> tol;
    std::optional<std::string> mode;
    std::optional<double> iou;
    bool class_agnostic = false;
    std::optional<std::string> name;
    std::vector<double> thresholds;

    std::optional<std::size_t> n_objects;
    std::optional<std::size_t> n_volunteers;
    std::optional<double> visibility;
    std::optional<double> spammer_fraction;
    std::optional<std::string> spammer_kind;
    std::optional<double> reliable_diagonal;
    std::optional<double> jitter;
};

void add_common(CLI::App& sub, Flags& f) {
    sub.add_option("--config", f.config, "JSON run configuration");
    sub.add_option("--out", f.out, "Output directory");
    sub.add_option("--seed", f.seed, "Random seed");
    sub.add_flag("--verbose", f.verbose, "Print progress details");
}

void add_raster_flags(CLI::App& sub, Flags& f) {
    sub.add_option("--png", f.png, "Probability raster (8-bit grayscale PNG)");
    sub.add_option("--geotransform", f.geotransform, "Geotransform JSON for --png");
    sub.add_option("--subject", f.subject, "Subject id for --png");
    sub.add_option("--phase", f.phase, "pre or post (default post)");
    sub.add_option("--min-area", f.min_area, "Minimum footprint box area");
}

fs::path cwd_path(const std::string& s) { return fs::path(s).lexically_normal(); }

void apply(const Flags& f, RunConfig& cfg) {
    if (f.out) {
        cfg.out = cwd_path(*f.out);
    }
    if (f.seed) {
        cfg.seed = *f.seed;
    }
    cfg.verbose = cfg.verbose || f.verbose;
    if (f.classifications) {
        cfg.classifications = cwd_path(*f.classifications);
    }
    if (!f.footprints.empty()) {
        cfg.footprints.clear();
        for (const std::string& p : f.footprints) {
            cfg.footprints.push_back(cwd_path(p));
        }
    }
    if (f.png) {
        require(f.geotransform.has_value() && f.subject.has_value(), "--png needs --geotransform and --subject");
        cfg.rasters = {RasterInput{cwd_path(*f.png), cwd_path(*f.geotransform), *f.subject,
                                   f.phase ? phase_of(*f.phase) : Phase::Post}};
    } else {
        require(!f.geotransform && !f.subject && !f.phase, "--geotransform, --subject and --phase need --png");
    }
    if (f.predictions) {
        cfg.predictions = cwd_path(*f.predictions);
    }
    if (f.truth) {
        cfg.truth = cwd_path(*f.truth);
    }
    if (f.results) {
        cfg.results = cwd_path(*f.results);
    }
    if (f.theta) {
        cfg.threshold = *f.theta;
    }
    if (f.min_area) {
        cfg.min_area = *f.min_area;
    }
    if (f.method) {
        cfg.method = parse_method(*f.method);
    }
    if (f.match_iou) {
        cfg.match_iou = *f.match_iou;
    }
    if (f.mark_radius) {
        cfg.mark_radius = *f.mark_radius;
    }
    if (f.empty_weight) {
        cfg.mv_weights.weights[index_of(ResponseLabel::Empty)] = *f.empty_weight;
    }
    if (f.max_iters) {
        cfg.max_iters = *f.max_iters;
    }
    if (f.tol) {
        cfg.tol = *f.tol;
    }
    if (f.mode) {
        cfg.eval_mode = parse_mode(*f.mode);
    }
    if (f.iou) {
        cfg.eval_iou = *f.iou;
    }
    if (f.class_agnostic) {
        cfg.class_aware = false;
    }
    if (f.name) {
        cfg.name = *f.name;
    }
    if (!f.thresholds.empty()) {
        cfg.thresholds = f.thresholds;
    }
    SimConfig& sim = cfg.simulation;
    if (f.n_objects) {
        sim.n_objects = *f.n_objects;
    }
    if (f.n_volunteers) {
        sim.n_volunteers = *f.n_volunteers;
    }
    if (f.visibility) {
        sim.visibility = *f.visibility;
    }
    if (f.spammer_fraction) {
        sim.spammer_fraction = *f.spammer_fraction;
    }
    if (f.spammer_kind) {
        sim.spammer_kind = parse_spammer_kind(*f.spammer_kind);
    }
    if (f.reliable_diagonal) {
        sim.reliable_diagonal = *f.reliable_diagonal;
    }
    if (f.jitter) {
        sim.jitter = *f.jitter;
    }
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Consensus building-damage labels from crowdsourced point marks", "crowdmark"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "crowdmark 0.1.0");
    Flags f;

    CLI::App* extract = app.add_subcommand("extract", "Extract building footprints from probability rasters");
    add_common(*extract, f);
    add_raster_flags(*extract, f);
    extract->add_option("--theta", f.theta, "Binarization threshold in [0, 1]");

    CLI::App* aggregate = app.add_subcommand("aggregate", "Join marks to footprints and aggregate consensus labels");
    add_common(*aggregate, f);
    aggregate->add_option("--method", f.method, "mv, em or ibcc");
    aggregate->add_option("--classifications", f.classifications, "Classifications CSV");
    aggregate->add_option("--footprints", f.footprints, "Footprint GeoJSON files (pre and/or post)");
    aggregate->add_option("--match-iou", f.match_iou, "Minimum IoU for pre/post association");
    aggregate->add_option("--mark-radius", f.mark_radius, "Snap radius for marks outside every box");
    aggregate->add_option("--empty-weight", f.empty_weight, "Majority-vote weight of the empty label");
    aggregate->add_option("--max-iters", f.max_iters, "Iteration cap for em/ibcc");
    aggregate->add_option("--tol", f.tol, "Convergence tolerance for em/ibcc");

    CLI::App* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
    add_common(*evaluate, f);
    evaluate->add_option("--mode", f.mode, "detection, classification or coco");
    evaluate->add_option("--predictions", f.predictions, "Predictions file");
    evaluate->add_option("--truth", f.truth, "Ground truth file");
    evaluate->add_option("--iou", f.iou, "IoU threshold for detection matching");
    evaluate->add_flag("--class-agnostic", f.class_agnostic, "Ignore labels in coco mode");
    evaluate->add_option("--name", f.name, "Row name in the report table");

    CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic crowd with planted truth");
    add_common(*simulate, f);
    simulate->add_option("--objects", f.n_objects, "Number of objects");
    simulate->add_option("--volunteers", f.n_volunteers, "Number of volunteers");
    simulate->add_option("--visibility", f.visibility, "Probability a volunteer views a subject");
    simulate->add_option("--spammer-fraction", f.spammer_fraction, "Fraction of spammer volunteers");
    simulate->add_option("--spammer-kind", f.spammer_kind, "uniform or over-marking");
    simulate->add_option("--reliable-diagonal", f.reliable_diagonal, "Diagonal mass of reliable volunteers");
    simulate->add_option("--jitter", f.jitter, "Mark displacement radius");

    CLI::App* sweep = app.add_subcommand("sweep-threshold", "Detection F1 over a grid of binarization thresholds");
    add_common(*sweep, f);
    add_raster_flags(*sweep, f);
    sweep->add_option("--truth", f.truth, "Expert boxes (CSV or GeoJSON)");
    sweep->add_option("--thresholds", f.thresholds, "Comma-separated threshold grid")->delimiter(',');
    sweep->add_option("--iou", f.iou, "IoU threshold for detection matching");

    CLI::App* export_coco = app.add_subcommand("export-coco", "Convert aggregation results to COCO annotations");
    add_common(*export_coco, f);
    export_coco->add_option("--results", f.results, "results.geojson written by aggregate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = f.config ? load_config(*f.config) : RunConfig{};
        apply(f, cfg);
        validate(cfg);
        if (extract->parsed()) {
            cmd_extract(cfg, out);
        } else if (aggregate->parsed()) {
            cmd_aggregate(cfg, out);
        } else if (evaluate->parsed()) {
            cmd_evaluate(cfg, out);
        } else if (simulate->parsed()) {
            cmd_simulate(cfg, out);
        } else if (sweep->parsed()) {
            cmd_sweep_threshold(cfg, out);
        } else {
            cmd_export_coco(cfg, out);
        }
    } catch (const InvalidParameter& e) {
        err << "crowdmark: invalid parameter: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "crowdmark: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace crowdmark::cli
