#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "fleetci/dataset.hpp"
#include "fleetci/feature_filter.hpp"
#include "fleetci/gbt.hpp"

namespace fleetci {

enum class EffectLevel { First, Second };

constexpr std::size_t kDefaultTopM = 10;

/// Per-binary-attribute interventional effects, ranked.
struct EffectRanking {
    EffectLevel level = EffectLevel::First;
    std::vector<std::string> names;  // binary attribute names
    std::vector<double> effects;     // one per binary attribute
    std::vector<std::size_t> order;  // attribute indices, effect descending, ties by lower index
    std::size_t top_m = kDefaultTopM;

    /// 1-based position of `feature` in `order`.
    std::size_t rank_of(std::size_t feature) const;
};

/// Builds the descending order for a vector of effects.
EffectRanking make_ranking(std::vector<double> effects, std::vector<std::string> names, EffectLevel level,
                           std::size_t top_m = kDefaultTopM);

using BatchPredictor = std::function<std::vector<double>(const RealMatrix&)>;

/// For every binary column i in [0, n_binary) of `design`: mean over all
/// rows of predict(rows with x_i := 1) - predict(rows with x_i := 0).
/// Per-row differences are combined with pairwise summation.
std::vector<double> toggle_effects(const BatchPredictor& predict, const RealMatrix& design, std::size_t n_binary);

/// Logistic ensemble on [x | y] with class_balance_weights(z).
TreeEnsemble fit_outcome_model(const FleetDataset& data, const BoostConfig& config);

EffectRanking estimate_attribute_effects(const TreeEnsemble& model, const FleetDataset& data,
                                         std::size_t top_m = kDefaultTopM);

/// First min(top_m, #strictly positive) attributes of the ranking.
std::vector<std::size_t> suggest_root_causes(const EffectRanking& ranking, std::size_t top_m);

/// Re-expresses a ranking computed on representatives in terms of every
/// original attribute: each attribute inherits its representative's effect.
EffectRanking expand_ranking(const EffectRanking& representative_ranking, const RepresentativeMap& map,
                             const std::vector<std::string>& original_names);

/// Delimited table: rank,feature,effect,group (group = ';'-joined members).
void write_effect_table(std::ostream& out, const EffectRanking& ranking, const RepresentativeMap* map = nullptr,
                        const std::vector<std::string>* original_names = nullptr);

} // namespace fleetci
