#include "fleetci/improvement.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <ostream>

namespace fleetci {

std::vector<double> LinearModel::predict(const RealMatrix& features) const {
    if (features.cols() != weights.size()) throw InputError("linear predict: dimension mismatch");
    std::vector<double> out(features.rows());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto row = features.row(r);
        out[r] = intercept + std::inner_product(row.begin(), row.end(), weights.begin(), 0.0);
    }
    return out;
}

LinearModel fit_ridge(const RealMatrix& features, std::span<const double> targets, double l2_penalty) {
    const std::size_t n = features.rows(), d = features.cols();
    if (n == 0 || targets.size() != n) throw InputError("fit_ridge: shape mismatch");
    if (!(l2_penalty >= 0.0)) throw InputError("fit_ridge: l2 penalty must be >= 0");
    // Centre so the intercept drops out of the penalised system.
    Eigen::VectorXd x_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    double y_mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) x_mean(j) += features(r, j);
        y_mean += targets[r];
    }
    x_mean /= static_cast<double>(n);
    y_mean /= static_cast<double>(n);

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd xc(d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) xc(j) = features(r, j) - x_mean(j);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(xc, 1.0 / static_cast<double>(n));
        rhs += xc * ((targets[r] - y_mean) / static_cast<double>(n));
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    gram.diagonal().array() += l2_penalty + 1e-12;
    const Eigen::VectorXd beta = gram.ldlt().solve(rhs);

    LinearModel model;
    model.weights.assign(beta.data(), beta.data() + d);
    model.intercept = y_mean - x_mean.dot(beta);
    return model;
}

std::string to_string(SecondLevelLearner learner) { return learner == SecondLevelLearner::Gbt ? "gbt" : "ridge"; }

SecondLevelLearner parse_second_level_learner(const std::string& text) {
    if (text == "gbt") return SecondLevelLearner::Gbt;
    if (text == "ridge" || text == "linear") return SecondLevelLearner::Ridge;
    throw InputError("unknown second-level learner '" + text + "' (expected gbt or ridge)");
}

std::vector<double> predict(const SecondLevelModel& model, const RealMatrix& features) {
    return std::visit([&](const auto& m) { return m.predict(features); }, model);
}

SecondLevelModel fit_second_level(const FleetDataset& data, std::span<const double> cate,
                                  const SecondLevelConfig& config) {
    if (cate.size() != data.size())
        throw InputError("fit_second_level: " + std::to_string(cate.size()) + " CATE values for " +
                         std::to_string(data.size()) + " rows");
    const RealMatrix design = data.design_matrix();
    if (config.learner == SecondLevelLearner::Ridge) return fit_ridge(design, cate, config.ridge_l2);
    return fit_gbt(design, cate, std::vector<double>(cate.size(), 1.0), Objective::Squared, config.boost);
}

EffectRanking estimate_treatment_modifiers(const SecondLevelModel& model, const FleetDataset& data,
                                           std::size_t top_m) {
    const RealMatrix design = data.design_matrix();
    const std::size_t expected = std::visit(
        [](const auto& m) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, TreeEnsemble>) return m.n_features;
            else return m.weights.size();
        },
        model);
    if (expected != design.cols())
        throw InputError("estimate_treatment_modifiers: model expects " + std::to_string(expected) +
                         " features, dataset has " + std::to_string(design.cols()));
    auto effects =
        toggle_effects([&](const RealMatrix& m) { return predict(model, m); }, design, data.n_binary());
    return make_ranking(std::move(effects), data.binary_names, EffectLevel::Second, top_m);
}

std::string to_string(Direction direction) {
    return direction == Direction::Addressed ? "addressed" : "next-cause";
}

Direction parse_direction(const std::string& text) {
    if (text == "addressed") return Direction::Addressed;
    if (text == "next-cause" || text == "next_cause") return Direction::NextCause;
    throw InputError("unknown direction '" + text + "' (expected addressed or next-cause)");
}

std::vector<std::size_t> directional_order(const EffectRanking& ranking, Direction direction) {
    std::vector<std::size_t> order(ranking.effects.size());
    std::iota(order.begin(), order.end(), 0);
    const auto& e = ranking.effects;
    if (direction == Direction::NextCause)
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return e[a] > e[b]; });
    else
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return e[a] < e[b]; });
    return order;
}

std::size_t rank_in_good_direction(const EffectRanking& ranking, std::size_t target_feature, Direction direction) {
    if (target_feature >= ranking.effects.size())
        throw InputError("rank_in_good_direction: unknown feature index " + std::to_string(target_feature));
    const auto order = directional_order(ranking, direction);
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), target_feature) - order.begin()) + 1;
}

std::vector<std::size_t> next_treatment_candidates(const EffectRanking& ranking, std::size_t top_m) {
    return suggest_root_causes(ranking, top_m);
}

std::vector<std::size_t> addressed_features(const EffectRanking& ranking, std::size_t top_m) {
    std::vector<std::size_t> out;
    for (auto f : directional_order(ranking, Direction::Addressed)) {
        if (out.size() >= top_m) break;
        if (ranking.effects[f] < 0.0) out.push_back(f);
    }
    return out;
}

void write_modifier_table(std::ostream& out, const EffectRanking& ranking) {
    out << "rank,feature,effect,direction\n";
    for (std::size_t pos = 0; pos < ranking.order.size(); ++pos) {
        const std::size_t f = ranking.order[pos];
        const double e = ranking.effects[f];
        const char* label = e > 0.0 ? "candidate next cause" : (e < 0.0 ? "addressed by treatment" : "neutral");
        out << pos + 1 << ',' << ranking.names[f] << ',' << format_real(e) << ',' << label << '\n';
    }
}

} // namespace fleetci
