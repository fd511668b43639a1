#include "fleetci/significance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace fleetci {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 100000;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw ConvergenceError("incomplete_beta: continued fraction did not converge");
}

// Stirling remainder of log Gamma(x): ln G(x) - [(x - 1/2) ln x - x + ln(2 pi)/2].
double stirling_remainder(double x) {
    const double x2 = x * x;
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x;
}

// log Gamma(a + b) - log Gamma(a); for large a the two lgamma values share
// their leading digits, so the difference is formed analytically.
double log_gamma_ratio(double a, double b) {
    if (a < 100.0) return std::lgamma(a + b) - std::lgamma(a);
    return (a - 0.5) * std::log1p(b / a) + b * std::log(a + b) - b + stirling_remainder(a + b) -
           stirling_remainder(a);
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw InputError("incomplete_beta: shape parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw InputError("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_inv_beta =
        a >= b ? log_gamma_ratio(a, b) - std::lgamma(b) : log_gamma_ratio(b, a) - std::lgamma(a);
    const double log_front = log_inv_beta + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
    if (!(dof > 0.0)) throw InputError("student_t_cdf: dof must be positive");
    if (t == 0.0) return 0.5;
    // P(|T| > |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2) = 1 - I_{t^2/(dof+t^2)}(1/2, dof/2).
    // The second form keeps the rounding of x from being multiplied by dof/2
    // when dof is large.
    const double t2 = t * t;
    const double tail = t2 < dof ? 0.5 * (1.0 - incomplete_beta(0.5, 0.5 * dof, t2 / (dof + t2)))
                                 : 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / (dof + t2));
    return t < 0.0 ? tail : 1.0 - tail;
}

double student_t_quantile(double alpha, double dof) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("student_t_quantile: alpha must be in (0,1)");
    if (!(dof > 0.0)) throw InputError("student_t_quantile: dof must be positive");
    if (alpha == 0.5) return 0.0;
    if (alpha > 0.5) return -student_t_quantile(1.0 - alpha, dof);

    double hi = 0.0, lo = -1.0;
    while (student_t_cdf(lo, dof) > alpha) {
        hi = lo;
        lo *= 2.0;
        if (lo < -1e300) throw ConvergenceError("student_t_quantile: could not bracket the quantile");
    }
    for (int iter = 0; iter < 400; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (student_t_cdf(mid, dof) > alpha) hi = mid;
        else lo = mid;
        if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) break;
    }
    return 0.5 * (lo + hi);
}

TestReport population_t_test(std::span<const double> cate, double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw InputError("alpha must be in (0, 0.5)");
    if (cate.size() < 2) throw DegenerateDataError("t-test needs at least 2 CATE values");
    TestReport r;
    r.alpha = alpha;
    r.n_samples = cate.size();
    r.sample_mean = mean(cate);
    std::vector<double> sq(cate.size());
    for (std::size_t k = 0; k < cate.size(); ++k) {
        const double dev = cate[k] - r.sample_mean;
        sq[k] = dev * dev;
    }
    r.sample_sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(cate.size() - 1));
    if (!(r.sample_sd > 0.0))
        throw DegenerateDataError("t-test: sample standard deviation of CATE is zero (all values identical)");
    r.t_statistic = std::sqrt(static_cast<double>(r.n_samples)) * r.sample_mean / r.sample_sd;
    r.critical_value = student_t_quantile(alpha, static_cast<double>(r.n_samples - 1));
    r.population_effective = r.t_statistic < r.critical_value;
    return r;
}

double BootstrapResult::effective_fraction() const {
    if (intervals.empty()) return 0.0;
    const auto n = std::count_if(intervals.begin(), intervals.end(), [](const UnitInterval& u) { return u.effective; });
    return static_cast<double>(n) / static_cast<double>(intervals.size());
}

std::vector<UnitInterval> percentile_intervals(const RealMatrix& bag_predictions,
                                               std::span<const std::string> unit_ids, double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw InputError("alpha must be in (0, 0.5)");
    if (unit_ids.size() != bag_predictions.cols()) throw InputError("percentile_intervals: unit count mismatch");
    std::vector<UnitInterval> out(unit_ids.size());
    std::vector<double> column;
    for (std::size_t k = 0; k < unit_ids.size(); ++k) {
        column = bag_predictions.column(k);
        std::sort(column.begin(), column.end());
        auto& u = out[k];
        u.unit_id = unit_ids[k];
        u.lb = quantile_sorted(column, alpha);
        u.ub = quantile_sorted(column, 1.0 - alpha);
        u.effective = u.ub < 0.0;
    }
    return out;
}

RealMatrix bootstrap_bag_predictions(const FleetDataset& data, const XLearnerConfig& config,
                                     const BootstrapOptions& options, std::vector<std::string>* warnings,
                                     std::size_t* redraws) {
    if (options.n_bags < 2) throw InputError("bootstrap needs n_bags >= 2");
    if (!(options.alpha > 0.0 && options.alpha < 0.5)) throw InputError("alpha must be in (0, 0.5)");
    data.validate();
    std::vector<std::size_t> treated, control;
    for (std::size_t k = 0; k < data.size(); ++k) (data.treatment[k] ? treated : control).push_back(k);
    if (treated.empty()) throw DegenerateDataError("empty treatment arm: no rows with treatment = 1");
    if (control.empty()) throw DegenerateDataError("empty control arm: no rows with treatment = 0");

    const RealMatrix design = data.design_matrix();
    const std::size_t n_bags = options.n_bags;
    RealMatrix predictions(n_bags, data.size());
    std::vector<std::size_t> bag_redraws(n_bags, 0);
    std::vector<std::vector<std::string>> bag_warnings(n_bags);

    parallel_for(n_bags, [&](std::size_t b) {
        const std::uint64_t bag_seed = mix_seed(options.master_seed, b);
        for (int attempt = 0;; ++attempt) {
            std::mt19937_64 rng(mix_seed(bag_seed, static_cast<std::uint64_t>(attempt)));
            std::vector<std::size_t> rows;
            rows.reserve(data.size());
            for (const auto* arm : {&treated, &control}) {
                std::uniform_int_distribution<std::size_t> pick(0, arm->size() - 1);
                for (std::size_t i = 0; i < arm->size(); ++i) rows.push_back((*arm)[pick(rng)]);
            }
            XLearnerConfig bag_config = config;
            bag_config.boost.rng_seed = bag_seed;
            try {
                const CateResult fit = estimate_cate(data.select_rows(rows), bag_config);
                const auto cate = predict_cate(fit, design);
                std::copy(cate.begin(), cate.end(), predictions.row(b).begin());
                for (const auto& w : fit.warnings) bag_warnings[b].push_back("bag " + std::to_string(b) + ": " + w);
                return;
            } catch (const DegenerateDataError&) {
                if (attempt >= options.max_redraws) throw;
                ++bag_redraws[b];
            }
        }
    });

    if (warnings) {
        if (options.alpha * static_cast<double>(n_bags - 1) < 1.0)
            warnings->push_back("n_bags = " + std::to_string(n_bags) +
                                " is too small to resolve the alpha percentile; bounds are bag extremes");
        for (auto& w : bag_warnings) warnings->insert(warnings->end(), w.begin(), w.end());
    }
    if (redraws) {
        *redraws = 0;
        for (auto r : bag_redraws) *redraws += r;
    }
    return predictions;
}

BootstrapResult bootstrap_unit_intervals(const FleetDataset& data, const XLearnerConfig& config,
                                         const BootstrapOptions& options) {
    BootstrapResult result;
    const RealMatrix bags = bootstrap_bag_predictions(data, config, options, &result.warnings, &result.redraws);
    result.intervals = percentile_intervals(bags, data.unit_ids, options.alpha);
    return result;
}

void write_interval_table(std::ostream& out, std::span<const UnitInterval> intervals) {
    out << "unit_id,lb,ub,effective\n";
    for (const auto& u : intervals)
        out << u.unit_id << ',' << format_real(u.lb) << ',' << format_real(u.ub) << ',' << (u.effective ? 1 : 0)
            << '\n';
}

} // namespace fleetci
