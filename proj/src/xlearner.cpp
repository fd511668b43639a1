#include "fleetci/xlearner.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

namespace fleetci {

namespace {

struct ArmFit {
    OutcomeModel model;
    std::string warning;
};

ArmFit fit_arm_outcome(const RealMatrix& design, std::span<const std::uint8_t> z, const XLearnerConfig& config,
                       const char* arm) {
    ArmFit fit;
    std::vector<double> targets(z.begin(), z.end());
    const auto ones = static_cast<std::size_t>(std::count(z.begin(), z.end(), std::uint8_t{1}));
    const bool single_class = ones == 0 || ones == z.size();
    std::vector<double> weights(z.size(), 1.0);
    if (config.balance_classes && !single_class) {
        weights = class_balance_weights(z);
        if (config.prior_correction)
            fit.model.margin_offset =
                std::log(static_cast<double>(ones) / static_cast<double>(z.size() - ones));
    } else if (config.balance_classes) {
        fit.warning = std::string(arm) + " arm outcome has a single class; fitted without class balancing";
    }
    fit.model.ensemble = fit_gbt(design, targets, weights, Objective::Logistic, config.boost);
    if (single_class) fit.model.constant = ones == 0 ? 0.0 : 1.0;
    return fit;
}

std::vector<double> propensity_of(const PropensityModel& model, const RealMatrix& design) {
    auto p = std::visit([&](const auto& m) { return m.predict(design); }, model);
    for (double& v : p) v = std::clamp(v, kPropensityClip, 1.0 - kPropensityClip);
    return p;
}

} // namespace

std::string to_string(PropensityLearner learner) { return learner == PropensityLearner::Logistic ? "logistic" : "gbt"; }

PropensityLearner parse_propensity_learner(const std::string& text) {
    if (text == "logistic" || text == "lr") return PropensityLearner::Logistic;
    if (text == "gbt") return PropensityLearner::Gbt;
    throw InputError("unknown propensity learner '" + text + "' (expected logistic or gbt)");
}

std::vector<double> OutcomeModel::predict(const RealMatrix& features) const {
    if (constant) return std::vector<double>(features.rows(), *constant);
    auto margin = ensemble.predict_margin(features);
    for (double& m : margin) m = sigmoid(m + margin_offset);
    return margin;
}

CateResult estimate_cate(const FleetDataset& data, const XLearnerConfig& config) {
    data.validate();
    config.boost.validate();
    std::vector<std::size_t> treated, control;
    for (std::size_t k = 0; k < data.size(); ++k) (data.treatment[k] ? treated : control).push_back(k);
    if (treated.empty()) throw DegenerateDataError("empty treatment arm: no rows with treatment = 1");
    if (control.empty()) throw DegenerateDataError("empty control arm: no rows with treatment = 0");

    const RealMatrix design = data.design_matrix();
    const RealMatrix design_t = design.select_rows(treated);
    const RealMatrix design_c = design.select_rows(control);
    std::vector<std::uint8_t> z_t, z_c;
    for (auto k : treated) z_t.push_back(data.outcome[k]);
    for (auto k : control) z_c.push_back(data.outcome[k]);

    CateResult result;
    result.config = config;

    // Stage 1: propensity.
    if (config.propensity == PropensityLearner::Logistic) {
        LogisticOptions opts;
        opts.l2_penalty = config.logistic_l2;
        result.propensity_model =
            fit_logistic(design, data.treatment, std::vector<double>(data.size(), 1.0), opts);
    } else {
        std::vector<double> t(data.treatment.begin(), data.treatment.end());
        result.propensity_model =
            fit_gbt(design, t, std::vector<double>(data.size(), 1.0), Objective::Logistic, config.boost);
    }

    // Stage 2: arm outcome models.
    ArmFit arm_fits[2];
    parallel_for(2, [&](std::size_t a) {
        arm_fits[a] = a == 0 ? fit_arm_outcome(design_c, z_c, config, "control")
                             : fit_arm_outcome(design_t, z_t, config, "treated");
    });
    for (auto& f : arm_fits)
        if (!f.warning.empty()) result.warnings.push_back(f.warning);
    result.control_outcome = std::move(arm_fits[0].model);
    result.treated_outcome = std::move(arm_fits[1].model);

    // Stage 3: imputed individual effects.
    const auto mu0_on_treated = result.control_outcome.predict(design_t);
    const auto mu1_on_control = result.treated_outcome.predict(design_c);
    std::vector<double> d1(treated.size()), d0(control.size());
    for (std::size_t i = 0; i < treated.size(); ++i) d1[i] = z_t[i] - mu0_on_treated[i];
    for (std::size_t i = 0; i < control.size(); ++i) d0[i] = mu1_on_control[i] - z_c[i];

    // Stage 4: effect regressions.
    TreeEnsemble effects[2];
    parallel_for(2, [&](std::size_t a) {
        effects[a] = a == 0 ? fit_gbt(design_c, d0, std::vector<double>(d0.size(), 1.0), Objective::Squared, config.boost)
                            : fit_gbt(design_t, d1, std::vector<double>(d1.size(), 1.0), Objective::Squared, config.boost);
    });
    result.control_effect = std::move(effects[0]);
    result.treated_effect = std::move(effects[1]);

    // Stage 5: propensity-weighted combination.
    result.propensity = propensity_of(result.propensity_model, design);
    result.cate = predict_cate(result, design);
    return result;
}

std::vector<double> predict_cate(const CateResult& result, const RealMatrix& design) {
    const auto g = propensity_of(result.propensity_model, design);
    const auto tau0 = result.control_effect.predict(design);
    const auto tau1 = result.treated_effect.predict(design);
    std::vector<double> out(design.rows());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = g[k] * tau0[k] + (1.0 - g[k]) * tau1[k];
    return out;
}

std::vector<double> imputed_effects(const CateResult& result, const FleetDataset& data) {
    const RealMatrix design = data.design_matrix();
    const auto mu0 = result.control_outcome.predict(design);
    const auto mu1 = result.treated_outcome.predict(design);
    std::vector<double> out(data.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = data.treatment[k] ? data.outcome[k] - mu0[k] : mu1[k] - data.outcome[k];
    return out;
}

double average_treatment_effect(const CateResult& result) { return mean(result.cate); }

void write_cate_table(std::ostream& out, const FleetDataset& data, const CateResult& result) {
    out << "unit_id,cate,propensity\n";
    for (std::size_t k = 0; k < data.size(); ++k)
        out << data.unit_ids[k] << ',' << format_real(result.cate[k]) << ',' << format_real(result.propensity[k])
            << '\n';
}

std::vector<double> read_cate_table(std::istream& in, const FleetDataset& data) {
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("unit_id,cate"))
        throw InputError("CATE table must start with a 'unit_id,cate' header");
    std::unordered_map<std::string, double> by_id;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        if (c1 == std::string::npos) throw InputError("malformed CATE row: " + line);
        const auto c2 = line.find(',', c1 + 1);
        const std::string id = line.substr(0, c1);
        const std::string value = line.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1);
        try {
            by_id[id] = std::stod(value);
        } catch (const std::exception&) {
            throw InputError("non-numeric CATE value in row: " + line);
        }
    }
    std::vector<double> out(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
        auto it = by_id.find(data.unit_ids[k]);
        if (it == by_id.end()) throw InputError("CATE table has no row for unit '" + data.unit_ids[k] + "'");
        out[k] = it->second;
    }
    return out;
}

} // namespace fleetci
