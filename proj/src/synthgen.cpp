#include "fleetci/synthgen.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <set>

namespace fleetci {

TreatmentEffectRule TreatmentEffectRule::constant_shift(double p_control, double p_treated) {
    TreatmentEffectRule rule;
    rule.base_log_odds = logit(p_treated) - logit(p_control);
    return rule;
}

void ScenarioConfig::validate() const {
    auto bad = [](const std::string& what) { throw InputError("scenario: " + what); };
    if (n_units < 2) bad("n_units must be >= 2");
    if (n_binary < 1) bad("n_binary must be >= 1");
    if (!(binary_rate > 0.0 && binary_rate < 1.0)) bad("binary_rate must be in (0,1)");
    if (!(baseline_rate > 0.0 && baseline_rate < 1.0)) bad("baseline_rate must be in (0,1)");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) bad("missing_rate must be in [0,1)");
    if (!(treatment.probability > 0.0 && treatment.probability < 1.0)) bad("treatment probability must be in (0,1)");
    for (const auto& c : causes)
        if (c.feature >= n_binary) bad("cause feature index out of range");
    for (const auto& m : effect.modifiers)
        if (m.feature >= n_binary) bad("effect modifier index out of range");
    for (const auto& l : confounders)
        if (l.feature >= n_continuous) bad("confounder index out of range");
    for (const auto& c : clones) {
        if (c.source >= n_binary) bad("clone source out of range");
        if (!(c.flip_probability >= 0.0 && c.flip_probability <= 1.0)) bad("clone flip probability must be in [0,1]");
    }
}

Scenario generate(const ScenarioConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = cfg.n_units, nb = cfg.n_binary + cfg.clones.size(), nc = cfg.n_continuous;

    Scenario s;
    FleetDataset& d = s.dataset;
    d.binary = BinaryMatrix(n, nb);
    d.continuous = RealMatrix(n, nc);
    d.treatment.resize(n);
    d.outcome.resize(n);
    for (std::size_t j = 0; j < nb; ++j) d.binary_names.push_back("x_" + std::to_string(j));
    for (std::size_t j = 0; j < nc; ++j) d.continuous_names.push_back("y_" + std::to_string(j));

    GroundTruth& truth = s.truth;
    truth.true_cate.resize(n);
    const double base_margin = logit(cfg.baseline_rate);
    const double treat_margin = logit(cfg.treatment.probability);

    for (std::size_t k = 0; k < n; ++k) {
        d.unit_ids.push_back("u" + std::to_string(k));
        for (std::size_t j = 0; j < cfg.n_binary; ++j) d.binary(k, j) = unif(rng) < cfg.binary_rate ? 1 : 0;
        for (std::size_t c = 0; c < cfg.clones.size(); ++c) {
            const auto src = d.binary(k, cfg.clones[c].source);
            const bool flip = unif(rng) < cfg.clones[c].flip_probability;
            d.binary(k, cfg.n_binary + c) = static_cast<std::uint8_t>(flip ? 1 - src : src);
        }
        for (std::size_t j = 0; j < nc; ++j) d.continuous(k, j) = normal(rng);

        double t_margin = treat_margin;
        if (cfg.treatment.kind == TreatmentMechanism::Kind::Confounded)
            for (const auto& l : cfg.confounders) t_margin += l.treatment_coef * d.continuous(k, l.feature);
        d.treatment[k] = unif(rng) < sigmoid(t_margin) ? 1 : 0;

        if (cfg.covariate_drift && d.treatment[k])
            for (std::size_t j = 0; j < nc; ++j) d.continuous(k, j) = cfg.drift_shift + normal(rng);

        double eta0 = base_margin;
        for (const auto& c : cfg.causes) eta0 += c.log_odds * d.binary(k, c.feature);
        for (const auto& l : cfg.confounders) eta0 += l.outcome_coef * d.continuous(k, l.feature);
        double tau = cfg.effect.base_log_odds;
        for (const auto& m : cfg.effect.modifiers) tau += m.log_odds * d.binary(k, m.feature);

        const double p0 = sigmoid(eta0), p1 = sigmoid(eta0 + tau);
        truth.true_cate[k] = p1 - p0;
        d.outcome[k] = unif(rng) < (d.treatment[k] ? p1 : p0) ? 1 : 0;
    }

    if (cfg.missing_rate > 0.0)
        for (auto& v : d.continuous.data())
            if (unif(rng) < cfg.missing_rate) v = std::numeric_limits<double>::quiet_NaN();

    std::size_t treated = 0;
    for (auto t : d.treatment) treated += t;
    if (treated == 0 || treated == n)
        throw DegenerateDataError("scenario: infeasible configuration, sampled treatment arm sizes are " +
                                  std::to_string(treated) + " treated / " + std::to_string(n - treated) + " control");

    truth.true_ate = mean(truth.true_cate);
    std::set<std::size_t> causes, modifiers;
    for (const auto& c : cfg.causes)
        if (c.log_odds != 0.0) causes.insert(c.feature);
    for (const auto& m : cfg.effect.modifiers)
        if (m.log_odds != 0.0) modifiers.insert(m.feature);
    truth.true_cause_set.assign(causes.begin(), causes.end());
    truth.true_modifier_set.assign(modifiers.begin(), modifiers.end());
    return s;
}

void write_ground_truth(std::ostream& out, const FleetDataset& data, const GroundTruth& truth) {
    out << "unit_id,true_cate\n";
    for (std::size_t k = 0; k < data.size(); ++k)
        out << data.unit_ids[k] << ',' << format_real(truth.true_cate[k]) << '\n';
}

namespace scenarios {

ScenarioConfig null_effect(std::size_t n_units, std::uint64_t seed) {
    ScenarioConfig c;
    c.n_units = n_units;
    c.n_binary = 5;
    c.n_continuous = 2;
    c.baseline_rate = 0.07;
    c.causes = {{0, 1.0}};
    c.confounders = {{0, 0.0, 0.5}};
    c.seed = seed;
    return c;
}

ScenarioConfig constant_effect(std::size_t n_units, std::uint64_t seed) {
    ScenarioConfig c;
    c.n_units = n_units;
    c.n_binary = 5;
    c.n_continuous = 2;
    c.baseline_rate = 0.5;
    c.effect = TreatmentEffectRule::constant_shift(0.5, 0.3);
    c.seed = seed;
    return c;
}

ScenarioConfig works_on_x1(std::size_t n_units, std::uint64_t seed) {
    ScenarioConfig c;
    c.n_units = n_units;
    c.n_binary = 5;
    c.n_continuous = 2;
    c.baseline_rate = 0.3;
    c.effect.modifiers = {{1, logit(0.05) - logit(0.3)}};
    c.seed = seed;
    return c;
}

ScenarioConfig fails_on_x2(std::size_t n_units, std::uint64_t seed) {
    ScenarioConfig c;
    c.n_units = n_units;
    c.n_binary = 5;
    c.n_continuous = 2;
    c.baseline_rate = 0.3;
    const double shift = logit(0.05) - logit(0.3);
    c.effect.base_log_odds = shift;
    c.effect.modifiers = {{2, -shift}};
    c.seed = seed;
    return c;
}

ScenarioConfig planted_root_cause(std::size_t n_units, std::uint64_t seed) {
    ScenarioConfig c;
    c.n_units = n_units;
    c.n_binary = 21;
    c.n_continuous = 2;
    c.binary_rate = 0.12;
    c.baseline_rate = 0.03;
    c.causes = {{kPlantedCause, 4.0}};
    c.seed = seed;
    return c;
}

std::vector<std::string> names() { return {"null", "constant", "works-on-x1", "fails-on-x2", "root-cause"}; }

ScenarioConfig by_name(const std::string& name, std::size_t n_units, std::uint64_t seed) {
    if (name == "null") return null_effect(n_units, seed);
    if (name == "constant") return constant_effect(n_units, seed);
    if (name == "works-on-x1") return works_on_x1(n_units, seed);
    if (name == "fails-on-x2") return fails_on_x2(n_units, seed);
    if (name == "root-cause") return planted_root_cause(n_units, seed);
    throw InputError("unknown scenario '" + name + "'");
}

} // namespace scenarios

} // namespace fleetci
