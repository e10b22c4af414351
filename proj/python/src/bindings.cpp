#include "cli.hpp"

#include "crowdmark/aggregate.hpp"
#include "crowdmark/coco_export.hpp"
#include "crowdmark/errors.hpp"
#include "crowdmark/eval.hpp"
#include "crowdmark/geometry.hpp"
#include "crowdmark/ingest.hpp"
#include "crowdmark/matrix.hpp"
#include "crowdmark/simulate.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace crowdmark;

namespace {

using BoxTuple = std::tuple<double, double, double, double>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

BBox to_bbox(const BoxTuple& t) { return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)}; }
BoxTuple to_tuple(const BBox& b) { return {b.min_x, b.min_y, b.max_x, b.max_y}; }

ResponseLabel label_from(const std::string& s) {
    const auto l = parse_response_label(s);
    if (!l) {
        throw InvalidParameter("unknown label '" + s + "'");
    }
    return *l;
}

Phase phase_from(const std::string& s) {
    const auto p = parse_phase(s);
    if (!p) {
        throw InvalidParameter("unknown phase '" + s + "' (expected pre or post)");
    }
    return *p;
}

// Dense int matrix: -1 Unseen, 0..3 label index.
LabelMatrix matrix_from_array(const IntArray& cells, std::optional<std::vector<std::string>> object_ids,
                              std::optional<std::vector<std::string>> volunteer_ids) {
    if (cells.ndim() != 2) {
        throw InvalidParameter("label matrix must be two-dimensional");
    }
    const auto n = static_cast<std::size_t>(cells.shape(0));
    const auto k = static_cast<std::size_t>(cells.shape(1));
    std::vector<std::string> objects = object_ids.value_or(std::vector<std::string>{});
    std::vector<std::string> volunteers = volunteer_ids.value_or(std::vector<std::string>{});
    if (!object_ids) {
        for (std::size_t i = 0; i < n; ++i) {
            objects.push_back("o" + std::to_string(i));
        }
    }
    if (!volunteer_ids) {
        for (std::size_t j = 0; j < k; ++j) {
            volunteers.push_back("v" + std::to_string(j));
        }
    }
    if (objects.size() != n || volunteers.size() != k) {
        throw InvalidParameter("id lists must match the matrix shape");
    }
    LabelMatrix m(objects, std::vector<std::string>(n), volunteers);
    const auto view = cells.unchecked<2>();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const int v = view(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j));
            if (v < -1 || v > 3) {
                throw InvalidParameter("matrix cells must be -1 (unseen) or 0..3");
            }
            if (v >= 0) {
                m.set(i, j, label_at(static_cast<std::size_t>(v)));
            }
        }
    }
    return m;
}

IntArray array_from_matrix(const LabelMatrix& m) {
    IntArray out({static_cast<py::ssize_t>(m.num_objects()), static_cast<py::ssize_t>(m.num_volunteers())});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.num_objects(); ++i) {
        for (std::size_t j = 0; j < m.num_volunteers(); ++j) {
            const CellValue c = m.cell(i, j);
            view(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j)) = c ? static_cast<int>(index_of(*c)) : -1;
        }
    }
    return out;
}

ConfusionMatrix confusion_from(const DoubleArray& a) {
    if (a.ndim() != 2 || a.shape(0) != 4 || a.shape(1) != 4) {
        throw InvalidParameter("confusion priors must be 4x4");
    }
    ConfusionMatrix m{};
    const auto v = a.unchecked<2>();
    for (py::ssize_t j = 0; j < 4; ++j) {
        for (py::ssize_t l = 0; l < 4; ++l) {
            m[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)] = v(j, l);
        }
    }
    return m;
}

DoubleArray array_from_confusions(const std::vector<ConfusionMatrix>& ms) {
    DoubleArray out({static_cast<py::ssize_t>(ms.size()), py::ssize_t{4}, py::ssize_t{4}});
    auto v = out.mutable_unchecked<3>();
    for (std::size_t k = 0; k < ms.size(); ++k) {
        for (std::size_t j = 0; j < 4; ++j) {
            for (std::size_t l = 0; l < 4; ++l) {
                v(static_cast<py::ssize_t>(k), static_cast<py::ssize_t>(j), static_cast<py::ssize_t>(l)) = ms[k][j][l];
            }
        }
    }
    return out;
}

py::dict result_dict(const AggregationResult& r) {
    DoubleArray post({static_cast<py::ssize_t>(r.objects.size()), py::ssize_t{4}});
    auto v = post.mutable_unchecked<2>();
    std::vector<std::string> hard;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < r.objects.size(); ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            v(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j)) = r.objects[i].dist[j];
        }
        hard.emplace_back(to_string(r.objects[i].hard_label));
        ids.push_back(r.objects[i].object_id);
    }
    py::dict d;
    d["object_ids"] = ids;
    d["posteriors"] = post;
    d["hard_labels"] = hard;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    d["final_delta"] = r.final_delta;
    d["warnings"] = r.warnings;
    return d;
}

py::dict footprint_dict(const Footprint& fp) {
    std::vector<std::pair<double, double>> ring;
    for (const Point2D& p : fp.polygon.exterior) {
        ring.emplace_back(p.x, p.y);
    }
    py::dict d;
    d["id"] = fp.id;
    d["subject_id"] = fp.subject_id;
    d["bbox"] = to_tuple(fp.bbox);
    d["exterior"] = ring;
    d["phase"] = std::string(to_string(fp.phase));
    return d;
}

std::vector<ExpertLabel> gts_from(const std::vector<std::tuple<std::string, BoxTuple, std::string>>& gts) {
    std::vector<ExpertLabel> out;
    for (const auto& [subject, box, label] : gts) {
        out.push_back({to_bbox(box), subject, label_from(label)});
    }
    return out;
}

std::vector<Detection> dets_from(
    const std::vector<std::tuple<std::string, BoxTuple, std::optional<std::string>, double>>& dets) {
    std::vector<Detection> out;
    for (const auto& [subject, box, label, score] : dets) {
        out.push_back({to_bbox(box), subject, label ? std::optional(label_from(*label)) : std::nullopt, score});
    }
    return out;
}

std::map<std::string, ResponseLabel> label_map_from(const std::map<std::string, std::string>& m) {
    std::map<std::string, ResponseLabel> out;
    for (const auto& [k, v] : m) {
        out.emplace(k, label_from(v));
    }
    return out;
}

SimConfig sim_config(std::size_t n_objects, std::size_t n_volunteers, double spammer_fraction,
                     double reliable_diagonal, double visibility, const std::string& spammer_kind,
                     std::uint64_t seed) {
    SimConfig cfg;
    cfg.n_objects = n_objects;
    cfg.n_volunteers = n_volunteers;
    cfg.spammer_fraction = spammer_fraction;
    cfg.reliable_diagonal = reliable_diagonal;
    cfg.visibility = visibility;
    if (spammer_kind == "uniform") {
        cfg.spammer_kind = SpammerKind::Uniform;
    } else if (spammer_kind == "over-marking") {
        cfg.spammer_kind = SpammerKind::OverMarking;
    } else {
        throw InvalidParameter("unknown spammer kind '" + spammer_kind + "' (expected uniform or over-marking)");
    }
    cfg.seed = seed;
    return cfg;
}

} // namespace

PYBIND11_MODULE(_crowdmark, m) {
    m.doc() = "Crowd damage-mark aggregation, footprint extraction and detection metrics";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

    m.attr("LABELS") = std::vector<std::string>{"empty", "minor", "significant", "catastrophic"};

    m.def("digamma", &digamma, py::arg("x"));
    m.def(
        "iou", [](const BoxTuple& a, const BoxTuple& b) { return iou(to_bbox(a), to_bbox(b)); }, py::arg("a"),
        py::arg("b"), "Intersection over union of two (min_x, min_y, max_x, max_y) boxes.");

    m.def(
        "extract_footprints",
        [](const DoubleArray& prob, double theta, double min_area, const std::string& subject_id,
           const std::string& phase, const std::tuple<double, double, double, double, double, double>& geotransform) {
            if (prob.ndim() != 2) {
                throw InvalidParameter("probability raster must be two-dimensional");
            }
            const auto h = static_cast<std::size_t>(prob.shape(0));
            const auto w = static_cast<std::size_t>(prob.shape(1));
            ProbRaster raster(w, h, std::vector<double>(prob.data(), prob.data() + w * h));
            const auto& [a, b, c, d, e, f] = geotransform;
            raster.transform = GeoTransform{a, b, c, d, e, f};
            py::list out;
            for (const Footprint& fp : footprints_from_raster(raster, theta, min_area, subject_id, phase_from(phase))) {
                out.append(footprint_dict(fp));
            }
            return out;
        },
        py::arg("prob"), py::arg("theta") = 0.5, py::arg("min_area") = 0.0, py::arg("subject_id") = "s",
        py::arg("phase") = "post", py::arg("geotransform") = std::make_tuple(1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        "Threshold a (rows, cols) probability array and trace its components.");

    m.def(
        "build_matrix",
        [](const std::filesystem::path& classifications, const std::vector<std::filesystem::path>& footprints,
           double mark_radius, double match_iou) {
            const auto cls = load_classifications(classifications);
            std::vector<Footprint> pre;
            std::vector<Footprint> post;
            for (const auto& p : footprints) {
                for (Footprint& fp : load_footprints_vector(p)) {
                    (fp.phase == Phase::Pre ? pre : post).push_back(std::move(fp));
                }
            }
            const auto matches = pre.empty() ? std::vector<PrePostMatch>{} : associate_pre_post(pre, post, match_iou);
            const auto objects = make_objects(post, matches);
            const auto assignment = assign_marks(collect_marks(cls), objects, mark_radius);
            const LabelMatrix matrix = build_matrix(cls, objects, assignment);
            py::dict d;
            d["matrix"] = array_from_matrix(matrix);
            d["object_ids"] = matrix.object_ids();
            d["volunteer_ids"] = matrix.volunteer_ids();
            d["unassigned_marks"] = assignment.unassigned.size();
            return d;
        },
        py::arg("classifications"), py::arg("footprints"), py::arg("mark_radius") = 0.0,
        py::arg("match_iou") = kDefaultMatchIou,
        "Load classifications and footprint files and return the object/volunteer matrix "
        "(-1 unseen, 0..3 label index).");

    m.def(
        "majority_vote",
        [](const IntArray& matrix, const std::array<double, 4>& weights,
           std::optional<std::vector<std::string>> object_ids) {
            return result_dict(majority_vote(matrix_from_array(matrix, std::move(object_ids), std::nullopt),
                                             MVWeights{weights}));
        },
        py::arg("matrix"), py::arg("weights") = std::array<double, 4>{0.5, 1.0, 1.0, 1.0},
        py::arg("object_ids") = py::none());

    m.def(
        "dawid_skene_em",
        [](const IntArray& matrix, std::size_t max_iters, double tol, double smoothing,
           std::optional<std::vector<std::string>> object_ids) {
            EmResult r = dawid_skene_em(matrix_from_array(matrix, std::move(object_ids), std::nullopt),
                                        EmConfig{max_iters, tol, smoothing});
            py::dict d = result_dict(r.result);
            d["confusion"] = array_from_confusions(r.confusion);
            d["class_prior"] = r.class_prior;
            return d;
        },
        py::arg("matrix"), py::arg("max_iters") = 200, py::arg("tol") = 1e-4, py::arg("smoothing") = 0.01,
        py::arg("object_ids") = py::none());

    m.def(
        "ibcc_vb",
        [](const IntArray& matrix, std::optional<std::array<double, 4>> nu0, std::optional<DoubleArray> alpha0,
           std::size_t max_iters, double tol, std::optional<std::vector<std::string>> object_ids) {
            IbccPriors priors;
            if (nu0) {
                priors.nu0 = *nu0;
            }
            if (alpha0) {
                priors.alpha0 = confusion_from(*alpha0);
            }
            VbConfig cfg;
            cfg.max_iters = max_iters;
            cfg.tol = tol;
            IbccResult r = ibcc_vb(matrix_from_array(matrix, std::move(object_ids), std::nullopt), priors, cfg);
            std::vector<ConfusionMatrix> alpha;
            for (const auto& v : r.volunteers) {
                alpha.push_back(v.alpha);
            }
            py::dict d = result_dict(r.result);
            d["alpha"] = array_from_confusions(alpha);
            d["nu"] = r.nu;
            return d;
        },
        py::arg("matrix"), py::arg("nu0") = py::none(), py::arg("alpha0") = py::none(), py::arg("max_iters") = 200,
        py::arg("tol") = 1e-4, py::arg("object_ids") = py::none());

    m.def(
        "voc_metrics",
        [](const std::vector<std::tuple<std::string, BoxTuple, std::optional<std::string>, double>>& dets,
           const std::vector<std::tuple<std::string, BoxTuple, std::string>>& gts, double iou_thresh,
           bool class_aware) {
            const VocMetrics v =
                voc_metrics(match_detections(dets_from(dets), gts_from(gts), iou_thresh, class_aware));
            py::dict d;
            d["ap50"] = v.ap;
            d["f1"] = v.f1;
            d["precision"] = v.precision;
            d["recall"] = v.recall;
            d["tp"] = v.tp;
            d["fp"] = v.fp;
            d["fn"] = v.fn;
            return d;
        },
        py::arg("detections"), py::arg("ground_truth"), py::arg("iou") = 0.5, py::arg("class_aware") = false,
        "Detections are (subject_id, box, label or None, score); ground truth is (subject_id, box, label).");

    m.def(
        "coco_ap",
        [](const std::vector<std::tuple<std::string, BoxTuple, std::optional<std::string>, double>>& dets,
           const std::vector<std::tuple<std::string, BoxTuple, std::string>>& gts, bool class_aware,
           double small_max_area, double medium_max_area) {
            const CocoReport r =
                coco_ap(dets_from(dets), gts_from(gts), class_aware, CocoParams{small_max_area, medium_max_area});
            py::dict d;
            d["AP"] = r.ap;
            d["AP50"] = r.ap50;
            d["AP75"] = r.ap75;
            d["APs"] = r.ap_small;
            d["APm"] = r.ap_medium;
            d["APl"] = r.ap_large;
            return d;
        },
        py::arg("detections"), py::arg("ground_truth"), py::arg("class_aware") = true,
        py::arg("small_max_area") = 32.0 * 32.0, py::arg("medium_max_area") = 96.0 * 96.0);

    m.def(
        "classification_f1",
        [](const std::map<std::string, std::string>& predicted, const std::map<std::string, std::string>& truth) {
            const F1Report r = classification_f1(label_map_from(predicted), label_map_from(truth));
            py::dict classes;
            for (std::size_t c = 0; c < kNumClasses; ++c) {
                py::dict x;
                x["f1"] = r.classes[c].f1;
                x["precision"] = r.classes[c].precision;
                x["recall"] = r.classes[c].recall;
                x["support"] = r.classes[c].support;
                classes[py::str(std::string(to_string(label_at(c))))] = x;
            }
            py::dict d;
            d["weighted_f1"] = r.weighted_f1;
            d["support"] = r.total_support;
            d["classes"] = classes;
            return d;
        },
        py::arg("predicted"), py::arg("truth"));

    m.def(
        "simulate",
        [](std::size_t n_objects, std::size_t n_volunteers, double spammer_fraction, double reliable_diagonal,
           double visibility, const std::string& spammer_kind, std::uint64_t seed,
           std::optional<std::filesystem::path> out_dir) {
            const SimWorld w = generate(sim_config(n_objects, n_volunteers, spammer_fraction, reliable_diagonal,
                                                   visibility, spammer_kind, seed));
            if (out_dir) {
                export_world(w, *out_dir);
            }
            IntArray planted({static_cast<py::ssize_t>(w.objects.size()), static_cast<py::ssize_t>(n_volunteers)});
            auto v = planted.mutable_unchecked<2>();
            std::vector<std::string> ids;
            std::vector<std::string> truth;
            for (std::size_t i = 0; i < w.objects.size(); ++i) {
                ids.push_back(w.objects[i].object_id);
                truth.emplace_back(to_string(w.objects[i].truth));
                for (std::size_t k = 0; k < n_volunteers; ++k) {
                    const CellValue c = w.planted[i][k];
                    v(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(k)) = c ? static_cast<int>(index_of(*c)) : -1;
                }
            }
            py::dict d;
            d["object_ids"] = ids;
            d["volunteer_ids"] = w.volunteer_ids;
            d["truth"] = truth;
            d["planted"] = planted;
            return d;
        },
        py::arg("n_objects") = 200, py::arg("n_volunteers") = 20, py::arg("spammer_fraction") = 0.4,
        py::arg("reliable_diagonal") = 0.8, py::arg("visibility") = 0.4, py::arg("spammer_kind") = "uniform",
        py::arg("seed") = 42, py::arg("out_dir") = py::none(),
        "Synthetic crowd with planted truth; optionally writes classifications.csv, footprints.geojson and "
        "truth.csv into out_dir.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv{"crowdmark"};
            for (const auto& a : args) {
                argv.push_back(a.c_str());
            }
            std::ostringstream out;
            std::ostringstream err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return std::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a crowdmark subcommand in-process; returns (exit code, stdout, stderr).");
}
