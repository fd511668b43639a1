#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fleetci/dataset.hpp"

namespace fleetci {

/// Structural model behind every generated fleet:
///
///   x_j ~ Bernoulli(binary_rate)                      j < n_binary
///   clone c of x_s = x_s flipped with prob flip_c       appended after the base attributes
///   y_j ~ N(0, 1)
///   T   ~ Bernoulli(p)                                 randomized
///       ~ Bernoulli(sigmoid(logit p + sum a_j y_j))    confounded
///   eta0 = logit(baseline) + sum cause_i x_i + sum b_j y_j
///   tau  = effect.base + sum effect.modifier_i x_i     (log-odds shift from treatment)
///   z   ~ Bernoulli(sigmoid(eta0 + T tau))
///
/// The ground-truth CATE is sigmoid(eta0 + tau) - sigmoid(eta0), on the
/// probability scale; negative means the treatment lowers failure risk.
struct CauseTerm {
    std::size_t feature = 0;
    double log_odds = 0.0;
};

struct ConfounderLink {
    std::size_t feature = 0;  // continuous covariate index
    double treatment_coef = 0.0;
    double outcome_coef = 0.0;
};

struct TreatmentMechanism {
    enum class Kind { Randomized, Confounded };
    Kind kind = Kind::Randomized;
    double probability = 0.5;
};

struct TreatmentEffectRule {
    double base_log_odds = 0.0;
    std::vector<CauseTerm> modifiers;

    /// Shift that moves P(z=1) from p_control to p_treated when eta0 = logit(p_control).
    static TreatmentEffectRule constant_shift(double p_control, double p_treated);
};

struct CloneSpec {
    std::size_t source = 0;
    double flip_probability = 0.0;
};

struct ScenarioConfig {
    std::size_t n_units = 1000;
    std::size_t n_binary = 5;
    std::size_t n_continuous = 2;
    double binary_rate = 0.5;
    std::vector<CauseTerm> causes;
    std::vector<ConfounderLink> confounders;
    TreatmentMechanism treatment;
    TreatmentEffectRule effect;
    double baseline_rate = 0.05;
    double missing_rate = 0.0;
    std::vector<CloneSpec> clones;
    bool covariate_drift = false;  // treated units' covariates re-drawn post-treatment
    double drift_shift = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GroundTruth {
    std::vector<double> true_cate;
    double true_ate = 0.0;
    std::vector<std::size_t> true_cause_set;
    std::vector<std::size_t> true_modifier_set;
};

struct Scenario {
    FleetDataset dataset;  // continuous cells may be NaN when missing_rate > 0
    GroundTruth truth;
};

Scenario generate(const ScenarioConfig& config);

/// Ground-truth sidecar: unit_id,true_cate.
void write_ground_truth(std::ostream& out, const FleetDataset& data, const GroundTruth& truth);

/// Named presets shared by the tests, the acceptance suite and `simulate`.
namespace scenarios {

/// Randomized treatment with no effect; 10% outcome rate with one cause and one confounder.
ScenarioConfig null_effect(std::size_t n_units, std::uint64_t seed);

/// Randomized(0.5) treatment moving P(z=1) from 0.5 to 0.3 for every unit (ATE = -0.2).
ScenarioConfig constant_effect(std::size_t n_units, std::uint64_t seed);

/// Treatment only works on units with x_1 = 1.
ScenarioConfig works_on_x1(std::size_t n_units, std::uint64_t seed);

/// Treatment works everywhere except on units with x_2 = 1.
ScenarioConfig fails_on_x2(std::size_t n_units, std::uint64_t seed);

/// One planted cause (x_3) raising P(z=1) by about 0.6 among 20 noise
/// attributes; overall outcome rate about 10%.
ScenarioConfig planted_root_cause(std::size_t n_units, std::uint64_t seed);

inline constexpr std::size_t kPlantedCause = 3;

ScenarioConfig by_name(const std::string& name, std::size_t n_units, std::uint64_t seed);
std::vector<std::string> names();

} // namespace scenarios

} // namespace fleetci
