#include "crowdmark/simulate.hpp"

#include "crowdmark/errors.hpp"
#include "crowdmark/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crowdmark {

std::size_t SimRng::categorical(std::span<const double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double u = uniform() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        cum += weights[i];
        if (u < cum) {
            return i;
        }
    }
    // u can only reach here through rounding; take the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;) {
        if (weights[i] > 0.0) {
            return i;
        }
    }
    return weights.size() - 1;
}

namespace {

constexpr double kBoxSize = 10.0;
constexpr double kSpacing = 20.0;

bool is_distribution(std::span<const double> p) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            return false;
        }
        sum += v;
    }
    return std::abs(sum - 1.0) < 1e-9;
}

std::string numbered(char prefix, std::size_t i, int width) {
    std::string digits = std::to_string(i);
    if (digits.size() < static_cast<std::size_t>(width)) {
        digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    }
    return prefix + digits;
}

int digits_for(std::size_t n) {
    int d = 1;
    while (n >= 10) {
        n /= 10;
        ++d;
    }
    return std::max(d, 3);
}

} // namespace

void SimConfig::validate() const {
    if (n_objects == 0 || n_volunteers == 0 || objects_per_subject == 0) {
        throw InvalidParameter("simulation needs at least one object, volunteer and object per subject");
    }
    if (!is_distribution(class_prior)) {
        throw InvalidParameter("class prior must be a probability distribution");
    }
    if (!confusion.empty()) {
        if (confusion.size() != n_volunteers) {
            throw InvalidParameter("explicit confusion matrices must be given for every volunteer");
        }
        for (const auto& m : confusion) {
            for (const auto& row : m) {
                if (!is_distribution(row)) {
                    throw InvalidParameter("confusion rows must be probability distributions");
                }
            }
        }
    }
    const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(spammer_fraction) || !prob(reliable_diagonal) || !prob(overmark_rate) || !prob(visibility) ||
        !prob(duplicate_mark_rate)) {
        throw InvalidParameter("simulation probabilities must lie in [0,1]");
    }
    if (!(jitter >= 0.0) || jitter >= (kSpacing - kBoxSize) / 2.0) {
        throw InvalidParameter("jitter must lie in [0, 5)");
    }
}

ConfusionMatrix reliable_confusion(double diagonal) {
    ConfusionMatrix m{};
    const double off = (1.0 - diagonal) / static_cast<double>(kNumClasses - 1);
    for (std::size_t j = 0; j < kNumClasses; ++j) {
        for (std::size_t l = 0; l < kNumClasses; ++l) {
            m[j][l] = j == l ? diagonal : off;
        }
    }
    return m;
}

ConfusionMatrix uniform_confusion() { return reliable_confusion(1.0 / static_cast<double>(kNumClasses)); }

ConfusionMatrix overmarking_confusion(double mark_rate) {
    const double damage = mark_rate / static_cast<double>(kNumClasses - 1);
    ConfusionMatrix m{};
    for (auto& row : m) {
        row = {1.0 - mark_rate, damage, damage, damage};
    }
    return m;
}

std::vector<Footprint> SimWorld::footprints() const {
    std::vector<Footprint> out;
    out.reserve(objects.size());
    for (const SimObject& o : objects) {
        out.push_back(Footprint{o.object_id, o.subject_id, bbox_polygon(o.bbox), o.bbox, Phase::Post, std::nullopt});
    }
    return out;
}

std::vector<ObjectRecord> SimWorld::object_records() const {
    std::vector<ObjectRecord> out;
    out.reserve(objects.size());
    for (const SimObject& o : objects) {
        out.push_back(ObjectRecord{o.object_id, o.subject_id, o.bbox, o.object_id, std::nullopt});
    }
    return out;
}

std::map<std::string, ResponseLabel> SimWorld::truth() const {
    std::map<std::string, ResponseLabel> out;
    for (const SimObject& o : objects) {
        out.emplace(o.object_id, o.truth);
    }
    return out;
}

SimWorld generate(const SimConfig& config) {
    config.validate();
    SimRng rng(config.seed);
    SimWorld world;

    const std::size_t n_subjects = (config.n_objects + config.objects_per_subject - 1) / config.objects_per_subject;
    const int subject_width = digits_for(n_subjects);
    const int volunteer_width = digits_for(config.n_volunteers);
    const auto grid_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(config.objects_per_subject))));

    for (std::size_t k = 0; k < config.n_volunteers; ++k) {
        world.volunteer_ids.push_back(numbered('v', k, volunteer_width));
    }
    if (!config.confusion.empty()) {
        world.confusion = config.confusion;
    } else {
        const auto n_spam = static_cast<std::size_t>(std::llround(config.spammer_fraction * config.n_volunteers));
        const ConfusionMatrix spam = config.spammer_kind == SpammerKind::Uniform
                                         ? uniform_confusion()
                                         : overmarking_confusion(config.overmark_rate);
        for (std::size_t k = 0; k < config.n_volunteers; ++k) {
            world.confusion.push_back(k < config.n_volunteers - n_spam ? reliable_confusion(config.reliable_diagonal)
                                                                       : spam);
        }
    }

    // Planted truth: class from the prior, then a damage fraction inside that
    // class's band, mapped back through the severity thresholds.
    constexpr std::array<std::pair<double, double>, kNumClasses> bands{
        std::pair{0.0, 0.0}, std::pair{0.0, 0.2}, std::pair{0.2, 0.6}, std::pair{0.6, 1.0}};
    for (std::size_t s = 0; s < n_subjects; ++s) {
        world.subject_ids.push_back(numbered('s', s, subject_width));
    }
    for (std::size_t i = 0; i < config.n_objects; ++i) {
        const std::size_t s = i / config.objects_per_subject;
        const std::size_t t = i % config.objects_per_subject;
        SimObject obj;
        obj.subject_id = world.subject_ids[s];
        obj.object_id = obj.subject_id + "-" + std::to_string(t);
        const double x0 = static_cast<double>(t % grid_cols) * kSpacing + kSpacing / 4.0;
        const double y0 = static_cast<double>(t / grid_cols) * kSpacing + kSpacing / 4.0;
        obj.bbox = {x0, y0, x0 + kBoxSize, y0 + kBoxSize};
        const std::size_t cls = rng.categorical(config.class_prior);
        const auto [lo, hi] = bands[cls];
        obj.damage_fraction = cls == 0 ? 0.0 : lo + (hi - lo) * rng.open_uniform();
        obj.truth = label_from_damage_fraction(obj.damage_fraction);
        world.objects.push_back(std::move(obj));
    }

    world.planted.assign(config.n_objects, std::vector<CellValue>(config.n_volunteers, std::nullopt));
    const auto place = [&](const BBox& box) {
        // Interior point, kept one unit off the edges before jitter.
        Point2D p{box.min_x + 1.0 + rng.uniform() * (box.width() - 2.0),
                  box.min_y + 1.0 + rng.uniform() * (box.height() - 2.0)};
        if (config.jitter > 0.0) {
            p.x += (2.0 * rng.uniform() - 1.0) * config.jitter;
            p.y += (2.0 * rng.uniform() - 1.0) * config.jitter;
        }
        return p;
    };

    for (std::size_t s = 0; s < n_subjects; ++s) {
        const std::size_t begin = s * config.objects_per_subject;
        const std::size_t end = std::min(begin + config.objects_per_subject, config.n_objects);
        for (std::size_t k = 0; k < config.n_volunteers; ++k) {
            if (!rng.bernoulli(config.visibility)) {
                continue;
            }
            Classification cls{world.volunteer_ids[k], world.subject_ids[s], {}, false};
            for (std::size_t i = begin; i < end; ++i) {
                const SimObject& obj = world.objects[i];
                const auto response = label_at(rng.categorical(world.confusion[k][index_of(obj.truth)]));
                world.planted[i][k] = response;
                if (response == ResponseLabel::Empty) {
                    continue;
                }
                const auto severity = static_cast<Severity>(index_of(response));
                cls.marks.push_back(Mark{cls.volunteer_id, cls.subject_id, place(obj.bbox), severity});
                if (rng.bernoulli(config.duplicate_mark_rate)) {
                    const auto extra = static_cast<Severity>(1 + rng.categorical(std::vector<double>(index_of(response), 1.0)));
                    cls.marks.push_back(Mark{cls.volunteer_id, cls.subject_id, place(obj.bbox), extra});
                }
            }
            cls.declared_empty = cls.marks.empty();
            world.classifications.push_back(std::move(cls));
        }
    }
    return world;
}

std::string truth_to_csv(const SimWorld& world) {
    std::string out = "object_id,label\n";
    for (const SimObject& o : world.objects) {
        out += io::csv_escape(o.object_id) + "," + std::string(to_string(o.truth)) + "\n";
    }
    return out;
}

void export_world(const SimWorld& world, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    }
    io::write_file_atomic(dir / "classifications.csv", classifications_to_csv(world.classifications));
    io::write_file_atomic(dir / "footprints.geojson", footprints_to_geojson(world.footprints()));
    io::write_file_atomic(dir / "truth.csv", truth_to_csv(world));
}

} // namespace crowdmark
