#pragma once

#include "crowdmark/aggregate.hpp"
#include "crowdmark/ingest.hpp"
#include "crowdmark/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace crowdmark {

/// Seeded generator with platform-independent derived draws (the standard
/// distributions are implementation-defined, mt19937_64 is not).
class SimRng {
public:
    explicit SimRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform in (0, 1).
    double open_uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
    bool bernoulli(double p) { return uniform() < p; }
    /// Index drawn from unnormalized non-negative weights.
    std::size_t categorical(std::span<const double> weights);

private:
    std::mt19937_64 engine_;
};

enum class SpammerKind : std::uint8_t {
    Uniform,     // every response equally likely whatever the truth
    OverMarking, // truth-independent, but mostly places damage marks
};

struct SimConfig {
    std::size_t n_objects = 200;
    std::size_t n_volunteers = 20;
    ClassDist class_prior{0.5, 0.2, 0.2, 0.1};
    /// Explicit per-volunteer confusion rows; when empty they are generated
    /// from the parameters below.
    std::vector<ConfusionMatrix> confusion;
    double spammer_fraction = 0.4;
    double reliable_diagonal = 0.8;
    SpammerKind spammer_kind = SpammerKind::Uniform;
    double overmark_rate = 0.8; // P(damage response) for over-marking spammers
    /// Probability that a volunteer views a given subject.
    double visibility = 0.4;
    std::size_t objects_per_subject = 10;
    /// Marks are displaced uniformly within [-jitter, jitter] on each axis.
    double jitter = 0.0;
    /// Probability of an extra, no-more-severe mark on an already marked object.
    double duplicate_mark_rate = 0.0;
    std::uint64_t seed = 42;

    void validate() const;
};

[[nodiscard]] ConfusionMatrix reliable_confusion(double diagonal);
[[nodiscard]] ConfusionMatrix uniform_confusion();
[[nodiscard]] ConfusionMatrix overmarking_confusion(double mark_rate);

struct SimObject {
    std::string object_id;
    std::string subject_id;
    BBox bbox;
    double damage_fraction = 0.0;
    ResponseLabel truth = ResponseLabel::Empty;

    friend bool operator==(const SimObject&, const SimObject&) = default;
};

struct SimWorld {
    std::vector<std::string> subject_ids;
    std::vector<SimObject> objects;
    std::vector<std::string> volunteer_ids; // sorted
    std::vector<ConfusionMatrix> confusion; // per volunteer
    std::vector<Classification> classifications;
    /// planted[i][k]: volunteer k's sampled response to object i, nullopt when
    /// the volunteer did not view the object's subject.
    std::vector<std::vector<CellValue>> planted;

    [[nodiscard]] std::vector<Footprint> footprints() const;
    [[nodiscard]] std::vector<ObjectRecord> object_records() const;
    [[nodiscard]] std::map<std::string, ResponseLabel> truth() const;

    friend bool operator==(const SimWorld&, const SimWorld&) = default;
};

/// Deterministic given config.seed. Objects sit on a per-subject grid of
/// 10x10 boxes spaced 20 units apart.
[[nodiscard]] SimWorld generate(const SimConfig& config);

/// Writes classifications.csv, footprints.geojson and truth.csv
/// (`object_id,label`) into `dir`, creating it if needed.
void export_world(const SimWorld& world, const std::filesystem::path& dir);

[[nodiscard]] std::string truth_to_csv(const SimWorld& world);

} // namespace crowdmark
