#include "fleetci/root_cause.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace fleetci {

std::size_t EffectRanking::rank_of(std::size_t feature) const {
    auto it = std::find(order.begin(), order.end(), feature);
    if (it == order.end()) throw InputError("unknown feature index " + std::to_string(feature));
    return static_cast<std::size_t>(it - order.begin()) + 1;
}

EffectRanking make_ranking(std::vector<double> effects, std::vector<std::string> names, EffectLevel level,
                           std::size_t top_m) {
    if (names.size() != effects.size()) throw InputError("make_ranking: names and effects differ in length");
    EffectRanking r;
    r.level = level;
    r.names = std::move(names);
    r.effects = std::move(effects);
    r.top_m = top_m;
    r.order.resize(r.effects.size());
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return r.effects[a] > r.effects[b]; });
    return r;
}

std::vector<double> toggle_effects(const BatchPredictor& predict, const RealMatrix& design, std::size_t n_binary) {
    if (n_binary > design.cols()) throw InputError("toggle_effects: more binary columns than design columns");
    std::vector<double> effects(n_binary, 0.0);
    parallel_for(n_binary, [&](std::size_t i) {
        RealMatrix on = design, off = design;
        on.set_column(i, 1.0);
        off.set_column(i, 0.0);
        const auto p1 = predict(on);
        const auto p0 = predict(off);
        if (p1.size() != design.rows() || p0.size() != design.rows())
            throw InputError("toggle_effects: predictor returned wrong length");
        std::vector<double> diff(p1.size());
        for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = p1[k] - p0[k];
        effects[i] = mean(diff);
    });
    return effects;
}

TreeEnsemble fit_outcome_model(const FleetDataset& data, const BoostConfig& config) {
    data.validate();
    const auto weights = class_balance_weights(data.outcome);
    std::vector<double> targets(data.outcome.begin(), data.outcome.end());
    return fit_gbt(data.design_matrix(), targets, weights, Objective::Logistic, config);
}

EffectRanking estimate_attribute_effects(const TreeEnsemble& model, const FleetDataset& data, std::size_t top_m) {
    const RealMatrix design = data.design_matrix();
    if (model.n_features != design.cols())
        throw InputError("estimate_attribute_effects: model was trained on " + std::to_string(model.n_features) +
                         " features, dataset has " + std::to_string(design.cols()));
    auto effects = toggle_effects([&](const RealMatrix& m) { return model.predict(m); }, design, data.n_binary());
    return make_ranking(std::move(effects), data.binary_names, EffectLevel::First, top_m);
}

std::vector<std::size_t> suggest_root_causes(const EffectRanking& ranking, std::size_t top_m) {
    std::vector<std::size_t> out;
    for (auto f : ranking.order) {
        if (out.size() >= top_m) break;
        if (ranking.effects[f] > 0.0) out.push_back(f);
    }
    return out;
}

EffectRanking expand_ranking(const EffectRanking& representative_ranking, const RepresentativeMap& map,
                             const std::vector<std::string>& original_names) {
    return make_ranking(map.expand(representative_ranking.effects), original_names, representative_ranking.level,
                        representative_ranking.top_m);
}

void write_effect_table(std::ostream& out, const EffectRanking& ranking, const RepresentativeMap* map,
                        const std::vector<std::string>* original_names) {
    out << "rank,feature,effect,group\n";
    for (std::size_t pos = 0; pos < ranking.order.size(); ++pos) {
        const std::size_t f = ranking.order[pos];
        out << pos + 1 << ',' << ranking.names[f] << ',' << format_real(ranking.effects[f]) << ',';
        if (map && original_names) {
            const auto members = map->group(map->representatives.at(f));
            for (std::size_t k = 0; k < members.size(); ++k) out << (k ? ";" : "") << original_names->at(members[k]);
        } else {
            out << ranking.names[f];
        }
        out << '\n';
    }
}

} // namespace fleetci
