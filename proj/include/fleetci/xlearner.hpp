#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fleetci/dataset.hpp"
#include "fleetci/gbt.hpp"
#include "fleetci/logistic.hpp"

namespace fleetci {

enum class PropensityLearner { Logistic, Gbt };

std::string to_string(PropensityLearner learner);
PropensityLearner parse_propensity_learner(const std::string& text);

constexpr double kPropensityClip = 1e-6;

struct XLearnerConfig {
    BoostConfig boost;
    PropensityLearner propensity = PropensityLearner::Logistic;
    double logistic_l2 = 1e-3;
    /// Fit the arm outcome models with class_balance_weights on z.
    bool balance_classes = true;
    /// Undo the prior shift introduced by balancing before the outcome
    /// models are used as probabilities (adds log(n1/n0) to the margin).
    bool prior_correction = true;
};

/// Arm outcome model with its probability-scale margin offset. An arm whose
/// outcome has a single class is represented by that class's exact
/// probability (0 or 1), which a finite margin cannot reach.
struct OutcomeModel {
    TreeEnsemble ensemble;
    double margin_offset = 0.0;
    std::optional<double> constant;

    std::vector<double> predict(const RealMatrix& features) const;
};

using PropensityModel = std::variant<LogisticModel, TreeEnsemble>;

struct CateResult {
    std::vector<double> cate;        // e_T per unit; negative = treatment lowers failure probability
    std::vector<double> propensity;  // clipped into [1e-6, 1 - 1e-6]
    PropensityModel propensity_model;
    OutcomeModel control_outcome;    // mu_0
    OutcomeModel treated_outcome;    // mu_1
    TreeEnsemble control_effect;     // tau_0, fit on control rows
    TreeEnsemble treated_effect;     // tau_1, fit on treated rows
    XLearnerConfig config;
    std::vector<std::string> warnings;
};

/// X-learner:
///  1. propensity g on (x, y) -> T
///  2. mu_0 on control rows, mu_1 on treated rows (logistic, class-balanced within the arm)
///  3. imputed effects D1 = z - mu_0(x) on treated rows, D0 = mu_1(x) - z on control rows
///  4. squared-loss regressions tau_1 on (treated, D1) and tau_0 on (control, D0)
///  5. e_T = g tau_0 + (1 - g) tau_1 for every unit
CateResult estimate_cate(const FleetDataset& data, const XLearnerConfig& config);

/// Evaluates a fitted X-learner at new covariates ([x | y] layout).
std::vector<double> predict_cate(const CateResult& result, const RealMatrix& design);

/// Stage-3 imputed effects for each row of `data`, returned in row order
/// (treated rows get D1, control rows get D0).
std::vector<double> imputed_effects(const CateResult& result, const FleetDataset& data);

double average_treatment_effect(const CateResult& result);

/// Delimited export: unit_id,cate,propensity.
void write_cate_table(std::ostream& out, const FleetDataset& data, const CateResult& result);

/// Reads a unit_id,cate[,propensity] table and aligns it with `data` by unit id.
std::vector<double> read_cate_table(std::istream& in, const FleetDataset& data);

} // namespace fleetci
