#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fleetci/significance.hpp"
#include "fleetci/synthgen.hpp"

using namespace fleetci;

TEST_CASE("t-test examples") {
    const auto zero = population_t_test(std::vector{-1.0, 1.0, -1.0, 1.0}, 0.05);
    CHECK(zero.t_statistic == 0.0);
    CHECK_FALSE(zero.population_effective);

    const auto r = population_t_test(std::vector{-1.0, -2.0, -3.0, -1.0, -3.0}, 0.05);
    CHECK(r.sample_mean == doctest::Approx(-2.0));
    CHECK(r.sample_sd == doctest::Approx(1.0));
    CHECK(std::abs(r.t_statistic + 2.0 * std::sqrt(5.0)) < 1e-12);
    CHECK(std::abs(r.t_statistic - (-4.472)) < 1e-3);
    CHECK(std::abs(r.critical_value - (-2.1318)) < 1e-4);
    CHECK(r.population_effective);
    CHECK(r.n_samples == 5);
}

TEST_CASE("t-test preconditions") {
    CHECK_THROWS_AS(population_t_test(std::vector{0.5, 0.5, 0.5}, 0.05), DegenerateDataError);
    CHECK_THROWS_AS(population_t_test(std::vector{0.5}, 0.05), DegenerateDataError);
    CHECK_THROWS_AS(population_t_test(std::vector{0.5, 1.0}, 0.5), InputError);
    CHECK_THROWS_AS(population_t_test(std::vector{0.5, 1.0}, 0.0), InputError);
}

TEST_CASE("t statistic decreases when every value is shifted down") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.3);
    std::vector<double> v(50);
    for (auto& x : v) x = g(rng);
    double previous = population_t_test(v, 0.05).t_statistic;
    for (double c : {0.01, 0.1, 1.0}) {
        auto shifted = v;
        for (auto& x : shifted) x -= c;
        const auto r = population_t_test(shifted, 0.05);
        CHECK(r.t_statistic < previous);
        CHECK(r.population_effective == (r.t_statistic < r.critical_value));
    }
}

TEST_CASE("student t quantile: reference values") {
    CHECK(student_t_quantile(0.5, 3) == 0.0);
    CHECK(student_t_quantile(0.5, 1000) == 0.0);
    CHECK(std::abs(student_t_quantile(0.05, 4) - (-2.1318)) < 1e-4);
    CHECK(std::abs(student_t_quantile(0.05, 1e6) - (-1.6449)) < 1e-3);
    CHECK(std::abs(student_t_quantile(0.05, 1e5) - (-1.645)) < 1e-3);
    CHECK(std::abs(student_t_quantile(0.975, 10) - 2.2281) < 1e-4);
    // Cauchy (one degree of freedom) has a closed form.
    CHECK(std::abs(student_t_quantile(0.1, 1) - std::tan(M_PI * (0.1 - 0.5))) < 1e-9);
}

TEST_CASE("student t quantile agrees with an independent implementation") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> a(0.001, 0.999);
    for (double dof : {1.0, 2.0, 3.0, 4.0, 7.0, 15.0, 30.0, 100.0, 1e3, 1e4, 1e6}) {
        boost::math::students_t dist(dof);
        for (int i = 0; i < 25; ++i) {
            const double alpha = a(rng);
            CHECK(std::abs(student_t_quantile(alpha, dof) - boost::math::quantile(dist, alpha)) < 1e-6);
            const double t = 6.0 * (a(rng) - 0.5);
            CHECK(std::abs(student_t_cdf(t, dof) - boost::math::cdf(dist, t)) < 1e-10);
        }
    }
}

TEST_CASE("regularized incomplete beta agrees with an independent implementation") {
    CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
    // I_x(1, 1) = x and I_x(a, 1) = x^a.
    CHECK(incomplete_beta(1.0, 1.0, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(incomplete_beta(2.5, 1.0, 0.4) == doctest::Approx(std::pow(0.4, 2.5)).epsilon(1e-13));
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const double a = std::exp(8.0 * u(rng) - 2.0), b = std::exp(8.0 * u(rng) - 2.0), x = u(rng);
        CHECK(std::abs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) < 1e-11);
    }
    CHECK_THROWS_AS(incomplete_beta(0.0, 1.0, 0.5), InputError);
    CHECK_THROWS_AS(incomplete_beta(1.0, 1.0, 1.5), InputError);
}

TEST_CASE("percentile intervals: bookkeeping properties") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    const std::size_t bags = 37, units = 20;
    RealMatrix preds(bags, units);
    for (auto& v : preds.data()) v = g(rng);
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < units; ++k) ids.push_back("u" + std::to_string(k));

    const auto base = percentile_intervals(preds, ids, 0.05);
    for (std::size_t k = 0; k < units; ++k) {
        auto col = preds.column(k);
        std::sort(col.begin(), col.end());
        const double median = col[bags / 2];
        CHECK(base[k].lb <= median);
        CHECK(median <= base[k].ub);
        CHECK(base[k].effective == (base[k].ub < 0.0));
        // h = 36 * 0.05 = 1.8 -> 0.2 of v[1] plus 0.8 of v[2].
        CHECK(base[k].lb == doctest::Approx(col[1] + 0.8 * (col[2] - col[1])).epsilon(1e-14));
    }

    for (double c : {0.125, -3.0, 10.0}) {
        RealMatrix shifted = preds;
        for (auto& v : shifted.data()) v += c;
        const auto moved = percentile_intervals(shifted, ids, 0.05);
        for (std::size_t k = 0; k < units; ++k) {
            CHECK(std::abs(moved[k].lb - (base[k].lb + c)) <= 1e-12);
            CHECK(std::abs(moved[k].ub - (base[k].ub + c)) <= 1e-12);
        }
    }

    // Dyadic values make the shift exact.
    RealMatrix dyadic(5, 1);
    for (std::size_t b = 0; b < 5; ++b) dyadic(b, 0) = static_cast<double>(b) * 0.25;
    RealMatrix dyadic_shift = dyadic;
    for (auto& v : dyadic_shift.data()) v += 0.5;
    const std::vector<std::string> one{"u"};
    const auto p = percentile_intervals(dyadic, one, 0.25), q = percentile_intervals(dyadic_shift, one, 0.25);
    CHECK(q[0].lb == p[0].lb + 0.5);
    CHECK(q[0].ub == p[0].ub + 0.5);
}

TEST_CASE("zero outcome gives [0, 0] intervals and no effective unit") {
    auto s = generate(scenarios::null_effect(200, 2));
    std::fill(s.dataset.outcome.begin(), s.dataset.outcome.end(), 0);
    XLearnerConfig cfg;
    cfg.boost.rounds = 20;
    BootstrapOptions opt;
    opt.n_bags = 20;
    opt.alpha = 0.1;
    const auto r = bootstrap_unit_intervals(s.dataset, cfg, opt);
    for (const auto& u : r.intervals) {
        CHECK(std::abs(u.lb) <= 1e-6);
        CHECK(std::abs(u.ub) <= 1e-6);
        CHECK_FALSE(u.effective);
    }
    CHECK(r.effective_fraction() == 0.0);
}

TEST_CASE("bootstrap output does not depend on the thread count") {
    const auto s = generate(scenarios::constant_effect(300, 3));
    XLearnerConfig cfg;
    cfg.boost.rounds = 30;
    BootstrapOptions opt;
    opt.n_bags = 12;
    opt.master_seed = 99;
    set_max_threads(1);
    const auto one = bootstrap_bag_predictions(s.dataset, cfg, opt);
    set_max_threads(4);
    const auto four = bootstrap_bag_predictions(s.dataset, cfg, opt);
    set_max_threads(0);
    CHECK(one == four);
    opt.master_seed = 100;
    CHECK_FALSE(bootstrap_bag_predictions(s.dataset, cfg, opt) == one);
}

TEST_CASE("too few bags for the percentile resolution is flagged") {
    const auto s = generate(scenarios::constant_effect(200, 4));
    XLearnerConfig cfg;
    cfg.boost.rounds = 10;
    BootstrapOptions opt;
    opt.n_bags = 5;
    const auto r = bootstrap_unit_intervals(s.dataset, cfg, opt);
    REQUIRE_FALSE(r.warnings.empty());
    CHECK(r.warnings[0].find("n_bags") != std::string::npos);
    opt.n_bags = 1;
    CHECK_THROWS_AS(bootstrap_unit_intervals(s.dataset, cfg, opt), InputError);
}

TEST_CASE("heterogeneous effect: x_1 units are declared effective more often") {
    const auto s = generate(scenarios::works_on_x1(1500, 5));
    XLearnerConfig cfg;
    cfg.boost.rounds = 60;
    BootstrapOptions opt;
    opt.n_bags = 40;
    opt.master_seed = 5;
    const auto r = bootstrap_unit_intervals(s.dataset, cfg, opt);
    double eff[2] = {0, 0}, count[2] = {0, 0};
    for (std::size_t k = 0; k < s.dataset.size(); ++k) {
        const auto g = s.dataset.binary(k, 1);
        eff[g] += r.intervals[k].effective;
        count[g] += 1;
    }
    CHECK(eff[1] / count[1] > eff[0] / count[0]);
}

TEST_CASE("interval table format") {
    std::vector<UnitInterval> iv{{"a", -0.5, -0.25, true}, {"b", -0.1, 0.0, false}};
    std::ostringstream out;
    write_interval_table(out, iv);
    CHECK(out.str() == "unit_id,lb,ub,effective\na,-0.5,-0.25,1\nb,-0.1,0,0\n");
}

TEST_CASE("constant effect of -0.2: most units have an interval entirely below zero") {
    const auto s = generate(scenarios::constant_effect(2000, 1000));
    // Shallow trees with large leaves; the library defaults overfit the
    // reweighted arms and widen the intervals (see README).
    XLearnerConfig cfg;
    cfg.boost.rounds = 100;
    cfg.boost.max_depth = 2;
    cfg.boost.min_samples_leaf = 100;
    BootstrapOptions opt;
    opt.n_bags = 200;
    opt.alpha = 0.05;
    opt.master_seed = 1000;
    const auto r = bootstrap_unit_intervals(s.dataset, cfg, opt);
    CHECK(r.effective_fraction() >= 0.9);
}
