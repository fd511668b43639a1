#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "fleetci/dataset.hpp"
#include "fleetci/gbt.hpp"
#include "fleetci/root_cause.hpp"
#include "fleetci/xlearner.hpp"

namespace fleetci {

/// L2-penalised least squares on [x | y]; the linear alternative for the
/// second-level model.
struct LinearModel {
    std::vector<double> weights;
    double intercept = 0.0;

    std::vector<double> predict(const RealMatrix& features) const;
};

/// Minimises (1/N) sum (y - b - x.beta)^2 + l2 |beta|^2 (intercept unpenalised).
LinearModel fit_ridge(const RealMatrix& features, std::span<const double> targets, double l2_penalty);

enum class SecondLevelLearner { Gbt, Ridge };

std::string to_string(SecondLevelLearner learner);
SecondLevelLearner parse_second_level_learner(const std::string& text);

struct SecondLevelConfig {
    SecondLevelLearner learner = SecondLevelLearner::Gbt;
    BoostConfig boost;
    double ridge_l2 = 1e-3;
};

using SecondLevelModel = std::variant<TreeEnsemble, LinearModel>;

std::vector<double> predict(const SecondLevelModel& model, const RealMatrix& features);

/// Regresses the per-unit CATE on [x | y] (no class weighting).
SecondLevelModel fit_second_level(const FleetDataset& data, std::span<const double> cate,
                                  const SecondLevelConfig& config);

/// Toggle-and-average effect of each binary attribute on the predicted CATE.
/// Positive effects work against the current treatment (next-cause
/// candidates); negative effects are what the treatment addressed.
EffectRanking estimate_treatment_modifiers(const SecondLevelModel& model, const FleetDataset& data,
                                           std::size_t top_m = kDefaultTopM);

enum class Direction {
    Addressed,  // ascending effect: most negative first
    NextCause,  // descending effect: most positive first
};

std::string to_string(Direction direction);
Direction parse_direction(const std::string& text);

/// Attribute indices ordered in the given direction; ties by lower index.
std::vector<std::size_t> directional_order(const EffectRanking& ranking, Direction direction);

/// 1-based rank of `target_feature` in the directional order.
std::size_t rank_in_good_direction(const EffectRanking& ranking, std::size_t target_feature, Direction direction);

/// Top min(top_m, #strictly positive) next-cause candidates.
std::vector<std::size_t> next_treatment_candidates(const EffectRanking& ranking, std::size_t top_m);

/// Top min(top_m, #strictly negative) attributes the treatment addressed.
std::vector<std::size_t> addressed_features(const EffectRanking& ranking, std::size_t top_m);

/// Delimited table: rank,feature,effect,direction.
void write_modifier_table(std::ostream& out, const EffectRanking& ranking);

} // namespace fleetci
