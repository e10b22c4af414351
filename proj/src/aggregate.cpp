#include "crowdmark/aggregate.hpp"

#include "crowdmark/errors.hpp"
#include "crowdmark/geojson.hpp"
#include "crowdmark/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crowdmark {

ResponseLabel hard_label_of(const ClassDist& dist) noexcept {
    std::size_t best = kNumClasses - 1;
    for (std::size_t j = kNumClasses - 1; j-- > 0;) {
        if (dist[j] > dist[best]) {
            best = j;
        }
    }
    return label_at(best);
}

std::vector<ResponseLabel> AggregationResult::hard_labels() const {
    std::vector<ResponseLabel> out;
    out.reserve(objects.size());
    for (const auto& o : objects) {
        out.push_back(o.hard_label);
    }
    return out;
}

namespace {

constexpr ClassDist kUniform{0.25, 0.25, 0.25, 0.25};

std::vector<ObjectConsensus> tally(const LabelMatrix& matrix) {
    std::vector<ObjectConsensus> out(matrix.num_objects());
    for (std::size_t i = 0; i < matrix.num_objects(); ++i) {
        out[i].object_id = matrix.object_ids()[i];
        for (const auto& e : matrix.row(i)) {
            ++out[i].counts[index_of(e.label)];
        }
        out[i].n_responses = matrix.row(i).size();
    }
    return out;
}

void require_responses(const LabelMatrix& matrix) {
    if (matrix.num_responses() == 0) {
        throw ValidationError("label matrix has no responses: every cell is Unseen");
    }
}

// Vote proportions with an additive pseudo-count; objects without responses
// start uniform.
std::vector<ClassDist> vote_proportions(const std::vector<ObjectConsensus>& tallies, double pseudo) {
    std::vector<ClassDist> q(tallies.size());
    for (std::size_t i = 0; i < tallies.size(); ++i) {
        const double total = static_cast<double>(tallies[i].n_responses) + pseudo * kNumClasses;
        if (total <= 0.0) {
            q[i] = kUniform;
            continue;
        }
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            q[i][j] = (static_cast<double>(tallies[i].counts[j]) + pseudo) / total;
        }
    }
    return q;
}

// In-place softmax over log-weights with max subtraction.
void softmax(ClassDist& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        sum += x;
    }
    for (double& x : v) {
        x /= sum;
    }
}

double max_abs_change(const std::vector<ClassDist>& a, const std::vector<ClassDist>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            d = std::max(d, std::abs(a[i][j] - b[i][j]));
        }
    }
    return d;
}

void finalize(std::vector<ObjectConsensus>& objects, const std::vector<ClassDist>& q) {
    for (std::size_t i = 0; i < objects.size(); ++i) {
        objects[i].dist = q[i];
        objects[i].hard_label = hard_label_of(q[i]);
    }
}

void check_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw InvalidParameter(std::string(what) + " must be positive and finite");
    }
}

} // namespace

// ---------------------------------------------------------------------------

void MVWeights::validate() const {
    for (double w : weights) {
        check_positive(w, "majority-vote weight");
    }
}

AggregationResult majority_vote(const LabelMatrix& matrix, const MVWeights& weights) {
    weights.validate();
    AggregationResult result;
    result.objects = tally(matrix);
    std::size_t unseen_objects = 0;
    for (ObjectConsensus& obj : result.objects) {
        if (obj.n_responses == 0) {
            obj.dist = kUniform;
            obj.hard_label = ResponseLabel::Empty;
            ++unseen_objects;
            continue;
        }
        ClassDist score{};
        double total = 0.0;
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            score[j] = weights.weights[j] * static_cast<double>(obj.counts[j]);
            total += score[j];
        }
        for (double& s : score) {
            s /= total;
        }
        obj.dist = score;
        obj.hard_label = hard_label_of(score);
    }
    if (unseen_objects > 0) {
        result.warnings.push_back(std::to_string(unseen_objects) +
                                  " object(s) have no responses and were labelled empty");
    }
    return result;
}

// ---------------------------------------------------------------------------

EmResult dawid_skene_em(const LabelMatrix& matrix, const EmConfig& config) {
    require_responses(matrix);
    if (!(config.tol > 0.0) || config.max_iters == 0 || !(config.smoothing > 0.0)) {
        throw InvalidParameter("EM needs tol > 0, max_iters > 0 and smoothing > 0");
    }
    const std::size_t n_obj = matrix.num_objects();
    const std::size_t n_vol = matrix.num_volunteers();
    const double s = config.smoothing;

    EmResult out;
    out.result.objects = tally(matrix);
    std::vector<ClassDist> q = vote_proportions(out.result.objects, 0.0);
    out.confusion.assign(n_vol, ConfusionMatrix{});
    out.result.converged = false;

    for (std::size_t iter = 1; iter <= config.max_iters; ++iter) {
        // M-step.
        ClassDist mass{};
        std::vector<ConfusionMatrix> counts(n_vol, ConfusionMatrix{});
        for (std::size_t i = 0; i < n_obj; ++i) {
            for (std::size_t j = 0; j < kNumClasses; ++j) {
                mass[j] += q[i][j];
            }
            for (const auto& e : matrix.row(i)) {
                for (std::size_t j = 0; j < kNumClasses; ++j) {
                    counts[e.volunteer][j][index_of(e.label)] += q[i][j];
                }
            }
        }
        const double total_mass = std::accumulate(mass.begin(), mass.end(), 0.0);
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            out.class_prior[j] = (mass[j] + s) / (total_mass + s * kNumClasses);
        }
        for (std::size_t k = 0; k < n_vol; ++k) {
            for (std::size_t j = 0; j < kNumClasses; ++j) {
                const auto& row = counts[k][j];
                const double row_sum = std::accumulate(row.begin(), row.end(), 0.0) + s * kNumClasses;
                for (std::size_t l = 0; l < kNumClasses; ++l) {
                    out.confusion[k][j][l] = row_sum > 0.0 ? (row[l] + s) / row_sum : 1.0 / kNumClasses;
                }
            }
        }

        // E-step.
        std::vector<ClassDist> next(n_obj);
        for (std::size_t i = 0; i < n_obj; ++i) {
            ClassDist& lp = next[i];
            for (std::size_t j = 0; j < kNumClasses; ++j) {
                lp[j] = std::log(out.class_prior[j]);
                for (const auto& e : matrix.row(i)) {
                    lp[j] += std::log(out.confusion[e.volunteer][j][index_of(e.label)]);
                }
            }
            softmax(lp);
        }

        out.result.final_delta = max_abs_change(q, next);
        out.result.iterations = iter;
        q = std::move(next);
        if (out.result.final_delta < config.tol) {
            out.result.converged = true;
            break;
        }
    }
    finalize(out.result.objects, q);
    return out;
}

// ---------------------------------------------------------------------------

ConfusionMatrix IbccPriors::diagonal_boosted(double base, double boost) {
    ConfusionMatrix m{};
    for (std::size_t j = 0; j < kNumClasses; ++j) {
        for (std::size_t l = 0; l < kNumClasses; ++l) {
            m[j][l] = base + (j == l ? boost : 0.0);
        }
    }
    return m;
}

void IbccPriors::validate() const {
    for (double v : nu0) {
        check_positive(v, "class-proportion prior");
    }
    const auto check_matrix = [](const ConfusionMatrix& m) {
        for (const auto& row : m) {
            for (double v : row) {
                check_positive(v, "confusion prior");
            }
        }
    };
    check_matrix(alpha0);
    for (const auto& [id, m] : per_volunteer) {
        check_matrix(m);
    }
}

const ConfusionMatrix& IbccPriors::alpha0_for(const std::string& volunteer_id) const {
    const auto it = per_volunteer.find(volunteer_id);
    return it == per_volunteer.end() ? alpha0 : it->second;
}

ConfusionMatrix expected_confusion(const ConfusionMatrix& alpha) {
    ConfusionMatrix out{};
    for (std::size_t j = 0; j < kNumClasses; ++j) {
        const double sum = std::accumulate(alpha[j].begin(), alpha[j].end(), 0.0);
        for (std::size_t l = 0; l < kNumClasses; ++l) {
            out[j][l] = alpha[j][l] / sum;
        }
    }
    return out;
}

IbccResult ibcc_vb(const LabelMatrix& matrix, const IbccPriors& priors, const VbConfig& config) {
    priors.validate();
    require_responses(matrix);
    if (!(config.tol > 0.0) || config.max_iters == 0) {
        throw InvalidParameter("VB needs tol > 0 and max_iters > 0");
    }
    const std::size_t n_obj = matrix.num_objects();
    const std::size_t n_vol = matrix.num_volunteers();

    std::vector<const ConfusionMatrix*> alpha0(n_vol);
    for (std::size_t k = 0; k < n_vol; ++k) {
        alpha0[k] = &priors.alpha0_for(matrix.volunteer_ids()[k]);
    }

    IbccResult out;
    out.result.objects = tally(matrix);
    out.result.converged = false;
    std::vector<ClassDist> q = vote_proportions(out.result.objects, 1.0);
    std::vector<ConfusionMatrix> alpha(n_vol);
    std::vector<ConfusionMatrix> e_log_pi(n_vol);

    for (std::size_t iter = 1; iter <= config.max_iters; ++iter) {
        // Class proportions.
        out.nu = priors.nu0;
        for (const ClassDist& qi : q) {
            for (std::size_t j = 0; j < kNumClasses; ++j) {
                out.nu[j] += qi[j];
            }
        }
        // Confusion rows.
        for (std::size_t k = 0; k < n_vol; ++k) {
            alpha[k] = *alpha0[k];
        }
        for (std::size_t i = 0; i < n_obj; ++i) {
            for (const auto& e : matrix.row(i)) {
                for (std::size_t j = 0; j < kNumClasses; ++j) {
                    alpha[e.volunteer][j][index_of(e.label)] += q[i][j];
                }
            }
        }

        // Expectations of log parameters.
        ClassDist e_log_kappa{};
        const double nu_sum = std::accumulate(out.nu.begin(), out.nu.end(), 0.0);
        const double psi_nu_sum = digamma(nu_sum);
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            e_log_kappa[j] = digamma(out.nu[j]) - psi_nu_sum;
        }
        for (std::size_t k = 0; k < n_vol; ++k) {
            for (std::size_t j = 0; j < kNumClasses; ++j) {
                const auto& row = alpha[k][j];
                const double psi_row = digamma(std::accumulate(row.begin(), row.end(), 0.0));
                for (std::size_t l = 0; l < kNumClasses; ++l) {
                    e_log_pi[k][j][l] = digamma(row[l]) - psi_row;
                }
            }
        }

        // Object posteriors.
        std::vector<ClassDist> next(n_obj);
        for (std::size_t i = 0; i < n_obj; ++i) {
            ClassDist& lr = next[i];
            lr = e_log_kappa;
            for (const auto& e : matrix.row(i)) {
                for (std::size_t j = 0; j < kNumClasses; ++j) {
                    lr[j] += e_log_pi[e.volunteer][j][index_of(e.label)];
                }
            }
            softmax(lr);
        }

        out.result.final_delta = max_abs_change(q, next);
        out.result.iterations = iter;
        if (config.observer) {
            config.observer(VbSweep{iter, &out.nu, next, out.result.final_delta});
        }
        q = std::move(next);
        if (out.result.final_delta < config.tol) {
            out.result.converged = true;
            break;
        }
    }

    finalize(out.result.objects, q);
    out.volunteers.reserve(n_vol);
    for (std::size_t k = 0; k < n_vol; ++k) {
        out.volunteers.push_back({matrix.volunteer_ids()[k], alpha[k]});
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

const std::array<std::string, kNumClasses> kProbColumns{"p_empty", "p_minor", "p_significant", "p_catastrophic"};
const std::array<std::string, kNumClasses> kCountColumns{"n_empty", "n_minor", "n_significant", "n_catastrophic"};

void require_same_objects(const AggregationResult& result, std::span<const ObjectRecord> objects) {
    if (result.objects.size() != objects.size()) {
        throw ValidationError("result and object list differ in length");
    }
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (result.objects[i].object_id != objects[i].object_id) {
            throw ValidationError("result object '" + result.objects[i].object_id + "' does not match '" +
                                  objects[i].object_id + "'");
        }
    }
}

} // namespace

std::string results_to_geojson(const AggregationResult& result, std::span<const ObjectRecord> objects) {
    require_same_objects(result, objects);
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const ObjectConsensus& c = result.objects[i];
        nlohmann::json props{{"object_id", c.object_id},
                             {"subject_id", objects[i].subject_id},
                             {"hard_label", std::string(to_string(c.hard_label))}};
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            props[kProbColumns[j]] = c.dist[j];
        }
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            props[kCountColumns[j]] = c.counts[j];
        }
        props["n_responses"] = c.n_responses;
        features.push_back({{"type", "Feature"},
                            {"geometry", geojson::to_json(bbox_polygon(objects[i].bbox))},
                            {"properties", props}});
    }
    return geojson::feature_collection(std::move(features)).dump(1) + "\n";
}

std::string results_to_csv(const AggregationResult& result, std::span<const ObjectRecord> objects) {
    require_same_objects(result, objects);
    std::string out = "object_id,subject_id,hard_label";
    for (const auto& c : kProbColumns) {
        out += "," + c;
    }
    out += ",n_responses,min_x,min_y,max_x,max_y\n";
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const ObjectConsensus& c = result.objects[i];
        out += io::csv_escape(c.object_id) + "," + io::csv_escape(objects[i].subject_id) + "," +
               std::string(to_string(c.hard_label));
        for (double p : c.dist) {
            out += "," + io::format_double(p);
        }
        const BBox& b = objects[i].bbox;
        out += "," + std::to_string(c.n_responses) + "," + io::format_double(b.min_x) + "," +
               io::format_double(b.min_y) + "," + io::format_double(b.max_x) + "," + io::format_double(b.max_y) + "\n";
    }
    return out;
}

std::string volunteer_matrices_to_json(std::span<const std::string> volunteer_ids,
                                       std::span<const ConfusionMatrix> matrices, const std::string& key) {
    if (volunteer_ids.size() != matrices.size()) {
        throw ValidationError("one matrix per volunteer expected");
    }
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t k = 0; k < matrices.size(); ++k) {
        arr.push_back({{"volunteer_id", volunteer_ids[k]}, {key, matrices[k]}});
    }
    return arr.dump(1) + "\n";
}

} // namespace crowdmark
