#pragma once

#include "crowdmark/aggregate.hpp"
#include "crowdmark/coco_export.hpp"
#include "crowdmark/eval.hpp"
#include "crowdmark/ingest.hpp"
#include "crowdmark/simulate.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crowdmark::cli {

struct RasterInput {
    std::filesystem::path png;
    std::filesystem::path geotransform;
    std::string subject_id;
    Phase phase = Phase::Post;
};

enum class Method : std::uint8_t { MajorityVote, Em, Ibcc };
enum class EvalMode : std::uint8_t { Detection, Classification, Coco };

/// Everything a run needs. Loaded from the JSON config, then overridden by
/// command-line flags.
struct RunConfig {
    std::filesystem::path out = "out";

    std::optional<std::filesystem::path> classifications;
    std::vector<std::filesystem::path> footprints; // vector footprint files, either phase
    std::vector<RasterInput> rasters;
    std::optional<std::filesystem::path> predictions;
    std::optional<std::filesystem::path> truth;
    std::optional<std::filesystem::path> results;

    double threshold = 0.5;
    double min_area = 0.0;
    double match_iou = kDefaultMatchIou;
    double mark_radius = 0.0;

    Method method = Method::Ibcc;
    MVWeights mv_weights;
    IbccPriors priors;
    double em_smoothing = 0.01;
    std::size_t max_iters = 200;
    double tol = 1e-4;

    EvalMode eval_mode = EvalMode::Classification;
    double eval_iou = 0.5;
    bool class_aware = true;
    std::string name;
    CocoParams coco;

    SimConfig simulation;
    std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::map<std::string, CocoImageSize> image_sizes;

    std::uint64_t seed = 42;
    bool verbose = false;
};

/// Reads a JSON config. Relative paths are resolved against `base_dir`.
/// Unknown keys are errors.
[[nodiscard]] RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// Range checks shared by every command.
void validate(const RunConfig& config);

// Commands. Each validates its inputs, computes everything in memory, then
// writes its outputs into config.out. Progress goes to `log`.
void cmd_extract(const RunConfig& config, std::ostream& log);
void cmd_aggregate(const RunConfig& config, std::ostream& log);
void cmd_evaluate(const RunConfig& config, std::ostream& log);
void cmd_simulate(const RunConfig& config, std::ostream& log);
void cmd_sweep_threshold(const RunConfig& config, std::ostream& log);
void cmd_export_coco(const RunConfig& config, std::ostream& log);

/// Full command line, including argv[0]. Returns the process exit code:
/// 0 success, 1 failure while running, 2 usage or config error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace crowdmark::cli
