#pragma once

#include "crowdmark/labels.hpp"
#include "crowdmark/matrix.hpp"

#include <array>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace crowdmark {

/// Probabilities over the true classes, indexed by ResponseLabel.
using ClassDist = std::array<double, kNumClasses>;
/// Rows: true class; columns: volunteer response.
using ConfusionMatrix = std::array<std::array<double, kNumClasses>, kNumClasses>;

/// Digamma function for x > 0: recurrence up to x >= 6, then the asymptotic
/// series. Throws DomainError otherwise.
[[nodiscard]] double digamma(double x);

/// Argmax; exact ties go to the more severe class.
[[nodiscard]] ResponseLabel hard_label_of(const ClassDist& dist) noexcept;

struct ObjectConsensus {
    std::string object_id;
    ClassDist dist{};
    ResponseLabel hard_label = ResponseLabel::Empty;
    std::array<std::size_t, kNumClasses> counts{}; // non-Unseen responses per label
    std::size_t n_responses = 0;

    friend bool operator==(const ObjectConsensus&, const ObjectConsensus&) = default;
};

struct AggregationResult {
    std::vector<ObjectConsensus> objects;
    std::size_t iterations = 0;
    bool converged = true;
    double final_delta = 0.0;
    std::vector<std::string> warnings;

    [[nodiscard]] std::vector<ResponseLabel> hard_labels() const;
};

// ---------------------------------------------------------------------------
// Weighted majority vote

struct MVWeights {
    /// Indexed by ResponseLabel; Empty is down-weighted by default.
    std::array<double, kNumClasses> weights{0.5, 1.0, 1.0, 1.0};

    static MVWeights unweighted() { return MVWeights{{1.0, 1.0, 1.0, 1.0}}; }
    /// Throws InvalidParameter unless every weight is positive and finite.
    void validate() const;
};

/// score(c) = weight(c) * #responses c. Objects nobody saw get Empty with a
/// uniform distribution and are listed in the result warnings.
[[nodiscard]] AggregationResult majority_vote(const LabelMatrix& matrix, const MVWeights& weights = {});

// ---------------------------------------------------------------------------
// Dawid-Skene EM

struct EmConfig {
    std::size_t max_iters = 200;
    double tol = 1e-4;
    double smoothing = 0.01; // additive pseudo-count in the M-step
};

struct EmResult {
    AggregationResult result;
    std::vector<ConfusionMatrix> confusion; // per volunteer, row-normalized
    ClassDist class_prior{};
};

[[nodiscard]] EmResult dawid_skene_em(const LabelMatrix& matrix, const EmConfig& config = {});

// ---------------------------------------------------------------------------
// Independent Bayesian classifier combination, variational Bayes

struct IbccPriors {
    std::array<double, kNumClasses> nu0{1.0, 1.0, 1.0, 1.0};
    ConfusionMatrix alpha0 = diagonal_boosted(1.0, 1.5);
    /// Informative per-volunteer priors, keyed by volunteer id.
    std::map<std::string, ConfusionMatrix> per_volunteer;

    /// base everywhere plus `boost` on the diagonal.
    static ConfusionMatrix diagonal_boosted(double base, double boost);
    void validate() const;
    [[nodiscard]] const ConfusionMatrix& alpha0_for(const std::string& volunteer_id) const;
};

/// State after one coordinate-ascent sweep, handed to VbConfig::observer.
struct VbSweep {
    std::size_t iteration = 0;
    const ClassDist* nu = nullptr;
    std::span<const ClassDist> posteriors;
    double delta = 0.0;
};

struct VbConfig {
    std::size_t max_iters = 200;
    double tol = 1e-4;
    std::function<void(const VbSweep&)> observer;
};

struct VolunteerPosterior {
    std::string volunteer_id;
    ConfusionMatrix alpha{}; // posterior Dirichlet counts

    friend bool operator==(const VolunteerPosterior&, const VolunteerPosterior&) = default;
};

struct IbccResult {
    AggregationResult result;
    std::vector<VolunteerPosterior> volunteers;
    ClassDist nu{}; // posterior Dirichlet counts over class proportions
};

[[nodiscard]] IbccResult ibcc_vb(const LabelMatrix& matrix, const IbccPriors& priors = {},
                                 const VbConfig& config = {});

/// Expected confusion probabilities E[pi] = alpha / row sum.
[[nodiscard]] ConfusionMatrix expected_confusion(const ConfusionMatrix& alpha);

// ---------------------------------------------------------------------------
// Export

/// FeatureCollection with each object's box and properties object_id,
/// subject_id, hard_label, p_<class>, n_<class>, n_responses.
[[nodiscard]] std::string results_to_geojson(const AggregationResult& result, std::span<const ObjectRecord> objects);
/// CSV `object_id,subject_id,hard_label,p_empty,...,n_responses,min_x,min_y,max_x,max_y`.
[[nodiscard]] std::string results_to_csv(const AggregationResult& result, std::span<const ObjectRecord> objects);
/// JSON array of {"volunteer_id", "<key>": 4x4 matrix}.
[[nodiscard]] std::string volunteer_matrices_to_json(std::span<const std::string> volunteer_ids,
                                                     std::span<const ConfusionMatrix> matrices,
                                                     const std::string& key);

} // namespace crowdmark
