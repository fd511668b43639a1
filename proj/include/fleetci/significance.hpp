#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fleetci/dataset.hpp"
#include "fleetci/xlearner.hpp"

namespace fleetci {

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

/// alpha-quantile of Student's t, by bisection on student_t_cdf.
double student_t_quantile(double alpha, double dof);

/// One-sided test of H0: mu >= 0 against H1: mu < 0 on the CATE sample.
struct TestReport {
    double sample_mean = 0.0;
    double sample_sd = 0.0;
    std::size_t n_samples = 0;
    double t_statistic = 0.0;
    double critical_value = 0.0;
    double alpha = 0.05;
    bool population_effective = false;
};

/// t = sqrt(N) mean / sd (sd with divisor N - 1); effective iff t < t_{N-1, alpha}.
/// Throws DegenerateDataError when sd = 0.
TestReport population_t_test(std::span<const double> cate, double alpha);

struct UnitInterval {
    std::string unit_id;
    double lb = 0.0;
    double ub = 0.0;
    bool effective = false;  // ub < 0
};

struct BootstrapOptions {
    std::size_t n_bags = 1000;
    double alpha = 0.05;
    std::uint64_t master_seed = 0;
    int max_redraws = 20;
};

struct BootstrapResult {
    std::vector<UnitInterval> intervals;
    std::vector<std::string> warnings;
    std::size_t redraws = 0;

    double effective_fraction() const;
};

/// Percentile bounds across bag predictions: per unit, the (alpha, 1 - alpha)
/// empirical quantiles (linear interpolation) of column k of `bag_predictions`
/// (rows = bags in bag-index order).
std::vector<UnitInterval> percentile_intervals(const RealMatrix& bag_predictions,
                                               std::span<const std::string> unit_ids, double alpha);

/// Bags resample treated and control rows separately with replacement (arm
/// sizes preserved), refit the X-learner with seed mix_seed(master_seed, b),
/// and predict CATE at every original unit. Bags run in parallel; results
/// do not depend on scheduling.
BootstrapResult bootstrap_unit_intervals(const FleetDataset& data, const XLearnerConfig& config,
                                         const BootstrapOptions& options);

/// Same as bootstrap_unit_intervals but returns the raw bag x unit matrix.
RealMatrix bootstrap_bag_predictions(const FleetDataset& data, const XLearnerConfig& config,
                                     const BootstrapOptions& options, std::vector<std::string>* warnings = nullptr,
                                     std::size_t* redraws = nullptr);

/// Delimited export: unit_id,lb,ub,effective.
void write_interval_table(std::ostream& out, std::span<const UnitInterval> intervals);

} // namespace fleetci
