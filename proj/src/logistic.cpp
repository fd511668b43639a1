#include "fleetci/logistic.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace fleetci {

namespace {

void check(const RealMatrix& x, std::span<const std::uint8_t> y, std::span<const double> w, double l2) {
    if (x.rows() == 0) throw InputError("fit_logistic: no rows");
    if (y.size() != x.rows() || w.size() != x.rows()) throw InputError("fit_logistic: shape mismatch");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw InputError("fit_logistic: l2 penalty must be finite and >= 0");
    for (double v : x.data())
        if (!std::isfinite(v)) throw InputError("fit_logistic: non-finite feature value");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 1) throw InputError("fit_logistic: targets must be 0 or 1");
        if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw InputError("fit_logistic: weights must be finite and >= 0");
        total += w[i];
    }
    if (!(total > 0.0)) throw InputError("fit_logistic: total sample weight must be positive");
}

// log(1 + exp(m)) without overflow.
double softplus(double m) { return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

double margin_of(std::span<const double> params, std::span<const double> row) {
    double m = params.back();
    for (std::size_t j = 0; j < row.size(); ++j) m += params[j] * row[j];
    return m;
}

} // namespace

std::vector<double> LogisticModel::predict(const RealMatrix& features) const {
    if (features.cols() != weights.size()) throw InputError("logistic predict: dimension mismatch");
    std::vector<double> out(features.rows());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto row = features.row(r);
        double m = intercept;
        for (std::size_t j = 0; j < row.size(); ++j) m += weights[j] * row[j];
        out[r] = sigmoid(m);
    }
    return out;
}

double logistic_objective(std::span<const double> params, const RealMatrix& x, std::span<const std::uint8_t> y,
                          std::span<const double> w, double l2) {
    double loss = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double m = margin_of(params, x.row(i));
        // -[y log s(m) + (1-y) log(1 - s(m))] = softplus(m) - y m
        loss += w[i] * (softplus(m) - y[i] * m);
        wsum += w[i];
    }
    double penalty = 0.0;
    for (std::size_t j = 0; j + 1 < params.size(); ++j) penalty += params[j] * params[j];
    return loss / wsum + 0.5 * l2 * penalty;
}

std::vector<double> logistic_gradient(std::span<const double> params, const RealMatrix& x,
                                      std::span<const std::uint8_t> y, std::span<const double> w, double l2) {
    const std::size_t d = x.cols();
    std::vector<double> grad(d + 1, 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto row = x.row(i);
        const double r = w[i] * (sigmoid(margin_of(params, row)) - y[i]);
        for (std::size_t j = 0; j < d; ++j) grad[j] += r * row[j];
        grad[d] += r;
        wsum += w[i];
    }
    for (std::size_t j = 0; j <= d; ++j) grad[j] /= wsum;
    for (std::size_t j = 0; j < d; ++j) grad[j] += l2 * params[j];
    return grad;
}

LogisticModel fit_logistic(const RealMatrix& x, std::span<const std::uint8_t> y, std::span<const double> w,
                           const LogisticOptions& options) {
    check(x, y, w, options.l2_penalty);
    const std::size_t n = x.rows(), d = x.cols(), p = d + 1;
    double wsum = 0.0;
    for (double v : w) wsum += v;

    std::vector<double> params(p, 0.0);
    double objective = logistic_objective(params, x, y, w, options.l2_penalty);
    Eigen::MatrixXd hessian(p, p);
    Eigen::VectorXd grad(p);

    LogisticModel model;
    for (int iter = 0;; ++iter) {
        const auto g = logistic_gradient(params, x, y, w, options.l2_penalty);
        for (std::size_t j = 0; j < p; ++j) grad(j) = g[j];
        const double gnorm = grad.norm();
        model.iterations = iter;
        model.gradient_norm = gnorm;
        if (gnorm <= options.tolerance) break;
        if (iter >= options.max_iterations)
            throw ConvergenceError("fit_logistic: gradient norm " + std::to_string(gnorm) + " after " +
                                   std::to_string(iter) + " iterations");

        hessian.setZero();
        Eigen::VectorXd z(p);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(i);
            const double s = sigmoid(margin_of(params, row));
            const double c = w[i] * s * (1.0 - s) / wsum;
            if (c == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) z(j) = row[j];
            z(d) = 1.0;
            hessian.selfadjointView<Eigen::Lower>().rankUpdate(z, c);
        }
        hessian = hessian.selfadjointView<Eigen::Lower>();
        for (std::size_t j = 0; j < d; ++j) hessian(j, j) += options.l2_penalty;
        // Levenberg-style floor keeps the system solvable for separable or rank-deficient data.
        hessian.diagonal().array() += 1e-12;
        Eigen::VectorXd step = hessian.ldlt().solve(-grad);
        if (!step.allFinite() || step.dot(grad) >= 0.0) step = -grad;

        double t = 1.0;
        std::vector<double> trial(p);
        double trial_obj = objective;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t j = 0; j < p; ++j) trial[j] = params[j] + t * step(j);
            trial_obj = logistic_objective(trial, x, y, w, options.l2_penalty);
            if (trial_obj <= objective + 1e-4 * t * step.dot(grad)) break;
            t *= 0.5;
        }
        if (trial_obj > objective)
            throw ConvergenceError("fit_logistic: line search failed with gradient norm " + std::to_string(gnorm));
        params = trial;
        objective = trial_obj;
    }

    model.weights.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d));
    model.intercept = params[d];
    for (double v : params)
        if (!std::isfinite(v)) throw ConvergenceError("fit_logistic: non-finite coefficients");
    return model;
}

} // namespace fleetci
