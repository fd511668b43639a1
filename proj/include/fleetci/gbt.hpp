#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fleetci/common.hpp"

namespace fleetci {

enum class Objective { Logistic, Squared };

std::string to_string(Objective objective);

struct BoostConfig {
    int rounds = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    int min_samples_leaf = 5;
    double subsample = 1.0;  // row fraction drawn (without replacement) per round
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;  // rows with x[feature] <= threshold go left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output (already scaled by the learning rate)

    bool is_leaf() const noexcept { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict_row(std::span<const double> row) const;
    int depth() const;
};

/// Additive tree ensemble. Logistic models output sigmoid(margin).
struct TreeEnsemble {
    Objective objective = Objective::Squared;
    double base_score = 0.0;  // margin before any tree
    std::size_t n_features = 0;
    std::vector<RegressionTree> trees;

    std::vector<double> predict_margin(const RealMatrix& features) const;
    std::vector<double> predict(const RealMatrix& features) const;
};

/// Gradient boosting with exact greedy split search.
///
/// Each round computes per-row gradient g and hessian h of the weighted loss
/// at the current margin (squared: g = w (f - y), h = w; logistic:
/// g = w (p - y), h = w p (1 - p)) and grows a depth-limited tree on them.
/// A split's gain is G_L^2/H_L + G_R^2/H_R - G^2/H and leaves take the
/// Newton value -G/H scaled by the learning rate. For squared loss this is a
/// least-squares regression tree on the negative gradient. Candidate
/// thresholds are midpoints between consecutive distinct values; ties go
/// to the lower feature index, then the lower threshold.
TreeEnsemble fit_gbt(const RealMatrix& features, std::span<const double> targets,
                     std::span<const double> sample_weights, Objective objective, const BoostConfig& config);

/// Weighted mean training loss (squared error or log-loss) of a model.
double weighted_loss(const TreeEnsemble& model, const RealMatrix& features, std::span<const double> targets,
                     std::span<const double> sample_weights);

/// Text format, version 1:
///   fleetci-tree-ensemble 1
///   objective <logistic|squared>
///   base_score <real>
///   n_features <int>
///   n_trees <int>
///   tree <index> <n_nodes>
///   node <id> split <feature> <threshold> <left> <right>
///   node <id> leaf <value>
void write_ensemble(std::ostream& out, const TreeEnsemble& model);
TreeEnsemble read_ensemble(std::istream& in);

/// Inverse class-frequency weights N / (2 count(c)); both classes get equal mass.
std::vector<double> class_balance_weights(std::span<const std::uint8_t> labels);

} // namespace fleetci
