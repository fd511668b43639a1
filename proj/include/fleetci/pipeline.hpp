#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fleetci/feature_filter.hpp"
#include "fleetci/improvement.hpp"
#include "fleetci/root_cause.hpp"
#include "fleetci/significance.hpp"
#include "fleetci/xlearner.hpp"

namespace fleetci {

inline constexpr const char* kReportSchema = "fleetci.report/1";

struct PipelineConfig {
    std::filesystem::path dataset;
    std::optional<std::filesystem::path> schema;      // sidecar; naming convention otherwise
    std::optional<std::filesystem::path> cate_file;   // reuse an exported CATE table (test/improve)
    std::filesystem::path out_dir = "fleetci-out";
    double filter_threshold = kDefaultFilterThreshold;
    BoostConfig boost;
    PropensityLearner propensity = PropensityLearner::Logistic;
    double logistic_l2 = 1e-3;
    SecondLevelLearner second_level = SecondLevelLearner::Gbt;
    double ridge_l2 = 1e-3;
    std::size_t top_m = kDefaultTopM;
    double alpha = 0.05;
    std::size_t n_bags = 1000;
    double promising_fraction = 0.5;  // share of units that must be individually effective
    std::uint64_t seed = 0;
    std::optional<std::string> target_feature;
    Direction target_direction = Direction::Addressed;
    unsigned threads = 0;

    void validate() const;
    XLearnerConfig xlearner() const;
    SecondLevelConfig second_level_config() const;
    nlohmann::json to_json() const;
};

/// Each stage writes `<stage>.json` (machine-readable, no timings),
/// `<stage>.txt` and its tables under out_dir, plus `<stage>.manifest.json`
/// with the config echo and wall-clock timings. The returned document is
/// the machine-readable report.
nlohmann::json run_filter(const PipelineConfig& config);
nlohmann::json run_rootcause(const PipelineConfig& config);
nlohmann::json run_cate(const PipelineConfig& config);
nlohmann::json run_test(const PipelineConfig& config);
nlohmann::json run_improve(const PipelineConfig& config);

/// One iteration of the find-fix-track loop: filter, root cause, CATE, tests,
/// and, when the treatment is not promising, the improvement ranking.
nlohmann::json run_pipeline(const PipelineConfig& config);

struct SimulateConfig {
    std::string scenario = "constant";
    std::size_t n_units = 2000;
    std::uint64_t seed = 0;
    double missing_rate = 0.0;
    bool covariate_drift = false;
    std::filesystem::path out_dir = "fleetci-out";
};

/// Writes dataset.csv and ground_truth.csv for a named scenario.
nlohmann::json run_simulate(const SimulateConfig& config);

} // namespace fleetci
