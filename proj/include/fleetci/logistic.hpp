#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fleetci/common.hpp"

namespace fleetci {

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;

    std::vector<double> predict(const RealMatrix& features) const;
};

struct LogisticOptions {
    double l2_penalty = 1e-3;
    double tolerance = 1e-6;  // on the Euclidean norm of the objective gradient
    int max_iterations = 200;
};

/// Objective minimised by fit_logistic:
///   (1/W) sum_k w_k * logloss(y_k, sigmoid(b + x_k . beta)) + (l2/2) |beta|^2
/// with W = sum_k w_k. The intercept is not penalised. Normalising by W
/// makes the fit invariant to rescaling all weights.
double logistic_objective(std::span<const double> params, const RealMatrix& features,
                          std::span<const std::uint8_t> targets, std::span<const double> sample_weights,
                          double l2_penalty);

/// Analytic gradient of logistic_objective; params = [beta..., b].
std::vector<double> logistic_gradient(std::span<const double> params, const RealMatrix& features,
                                      std::span<const std::uint8_t> targets, std::span<const double> sample_weights,
                                      double l2_penalty);

/// Damped Newton with backtracking line search. Throws ConvergenceError if
/// the gradient norm is still above tolerance after max_iterations.
LogisticModel fit_logistic(const RealMatrix& features, std::span<const std::uint8_t> targets,
                           std::span<const double> sample_weights, const LogisticOptions& options = {});

} // namespace fleetci
