#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "fleetci/dataset.hpp"
#include "helpers.hpp"

using namespace fleetci;

namespace {

const double NA = std::numeric_limits<double>::quiet_NaN();

// Sort the present values and average the two central ones.
double median_oracle(std::vector<double> v) {
    std::erase_if(v, [](double x) { return std::isnan(x); });
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i] == b[i] || (std::isnan(a[i]) && std::isnan(b[i])))) return false;
    return true;
}

} // namespace

TEST_CASE("impute_median fills gaps with the median of present values") {
    CHECK(impute_median(std::vector{1.0, NA, 3.0}) == std::vector{1.0, 2.0, 3.0});
    CHECK(impute_median(std::vector{5.0, 5.0, NA}) == std::vector{5.0, 5.0, 5.0});

    const std::vector<double> col{1.0, 2.0, 3.0, 4.0, NA};
    const auto out = impute_median(col);
    CHECK(out == std::vector{1.0, 2.0, 3.0, 4.0, median_oracle(col)});
    CHECK(out[4] == 2.5);
}

TEST_CASE("impute_median rejects a column with nothing to impute from") {
    try {
        impute_median(std::vector{NA, NA}, "y_speed");
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("y_speed") != std::string::npos);
    }
}

TEST_CASE("impute_median properties on random columns") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        std::vector<double> col(n);
        for (auto& v : col) v = (rng() % 3 == 0) ? NA : u(rng);
        if (std::all_of(col.begin(), col.end(), [](double v) { return std::isnan(v); })) col[0] = u(rng);

        const auto once = impute_median(col);
        const double med = median_oracle(col);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isnan(col[i])) CHECK(once[i] == med);
            else CHECK(once[i] == col[i]);
        }
        CHECK(impute_median(once) == once);
    }
}

TEST_CASE("ingestion of a complete file is an identity") {
    const std::string text =
        "id,x_a,x_b,y_speed,t,z\n"
        "v1,1,0,0.25,1,0\n"
        "v2,0,1,-3.5,0,1\n"
        "v3,1,1,1e-3,1,1\n"
        "v4,0,0,42,0,0\n";
    std::istringstream in(text);
    const auto r = read_dataset(in);
    const auto& d = r.dataset;
    CHECK(r.dropped_rows == 0);
    REQUIRE(d.size() == 4);
    CHECK(d.unit_ids == std::vector<std::string>{"v1", "v2", "v3", "v4"});
    CHECK(d.binary_names == std::vector<std::string>{"x_a", "x_b"});
    CHECK(d.continuous_names == std::vector<std::string>{"y_speed"});
    CHECK(d.binary.data() == std::vector<std::uint8_t>{1, 0, 0, 1, 1, 1, 0, 0});
    CHECK(d.continuous.data() == std::vector{0.25, -3.5, 1e-3, 42.0});
    CHECK(d.treatment == std::vector<std::uint8_t>{1, 0, 1, 0});
    CHECK(d.outcome == std::vector<std::uint8_t>{0, 1, 1, 0});
}

TEST_CASE("rows with a missing treatment or outcome are dropped and counted") {
    std::istringstream in(
        "x_a,y_0,t,z\n"
        "1,0.5,1,0\n"
        "0,0.1,,1\n"
        "1,NA,0,1\n"
        "0,0.7,1,NA\n"
        "1,0.9,0,0\n");
    const auto r = read_dataset(in);
    CHECK(r.dropped_rows == 2);
    CHECK(r.dataset.size() == 3);
    CHECK(r.dataset.unit_ids == std::vector<std::string>{"0", "2", "4"});
    // y_0 of the surviving NA row becomes the median of {0.5, 0.9}.
    CHECK(r.dataset.continuous(1, 0) == doctest::Approx(0.7));
    CHECK(r.imputed_columns == std::vector<std::string>{"y_0"});
}

TEST_CASE("a binary cell outside {0,1} is rejected naming the column") {
    std::istringstream in("x_a,x_door,t,z\n1,0,1,0\n0,2,0,1\n");
    try {
        read_dataset(in);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("x_door") != std::string::npos);
    }
}

TEST_CASE("a missing binary cell is an error, not imputed") {
    std::istringstream in("x_a,t,z\n1,1,0\n,0,1\n");
    CHECK_THROWS_AS(read_dataset(in), InputError);
}

TEST_CASE("header and schema problems are input errors") {
    std::istringstream no_t("x_a,z\n1,0\n0,1\n");
    CHECK_THROWS_AS(read_dataset(no_t), InputError);
    std::istringstream odd_name("x_a,speed,t,z\n1,0,1,0\n0,1,0,1\n");
    CHECK_THROWS_AS(read_dataset(odd_name), InputError);
    std::istringstream all_dropped("x_a,t,z\n1,,0\n0,1,\n");
    CHECK_THROWS_AS(read_dataset(all_dropped), InputError);
    CHECK_THROWS_AS(load_dataset("/nonexistent/fleet.csv"), InputError);
}

TEST_CASE("sidecar schema maps arbitrary column names") {
    testutil::TempDir dir("schema");
    const auto schema_path = dir.path() / "schema.txt";
    std::ofstream(schema_path) << "# fleet export\nvin=id\nheated_seats=binary_attribute\nmileage=continuous_covariate\n"
                                  "ota_ok=treatment\nfailed=outcome\n";
    const auto data_path = dir.path() / "fleet.csv";
    std::ofstream(data_path) << "vin,heated_seats,mileage,ota_ok,failed\nA,1,100,1,0\nB,0,200,0,1\n";
    const auto r = load_dataset(data_path, ColumnSchema::from_file(schema_path));
    CHECK(r.dataset.unit_ids == std::vector<std::string>{"A", "B"});
    CHECK(r.dataset.binary_names == std::vector<std::string>{"heated_seats"});
    CHECK(r.dataset.treatment_name == "ota_ok");
    CHECK(r.dataset.outcome == std::vector<std::uint8_t>{0, 1});
}

TEST_CASE("schema invariants") {
    CHECK_THROWS_AS(ColumnSchema({{"a", ColumnKind::BinaryAttribute}, {"z", ColumnKind::Outcome}}), InputError);
    CHECK_THROWS_AS(ColumnSchema({{"t", ColumnKind::Treatment}, {"z", ColumnKind::Outcome}}), InputError);
    CHECK_THROWS_AS(ColumnSchema({{"a", ColumnKind::BinaryAttribute},
                                  {"a", ColumnKind::BinaryAttribute},
                                  {"t", ColumnKind::Treatment},
                                  {"z", ColumnKind::Outcome}}),
                    InputError);
    CHECK_NOTHROW(ColumnSchema({{"a", ColumnKind::BinaryAttribute}, {"t", ColumnKind::Treatment}, {"z", ColumnKind::Outcome}}));
}

TEST_CASE("write then read is a fixed point for complete datasets") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 100.0);
    FleetDataset d;
    const std::size_t n = 57;
    d.binary = BinaryMatrix(n, 3);
    d.continuous = RealMatrix(n, 2);
    for (std::size_t k = 0; k < n; ++k) {
        d.unit_ids.push_back("unit-" + std::to_string(k * 7));
        for (std::size_t j = 0; j < 3; ++j) d.binary(k, j) = rng() % 2;
        for (std::size_t j = 0; j < 2; ++j) d.continuous(k, j) = g(rng) / 3.0;
        d.treatment.push_back(rng() % 2);
        d.outcome.push_back(rng() % 2);
    }
    d.binary_names = {"x_0", "x_1", "x_2"};
    d.continuous_names = {"y_0", "y_1"};

    std::stringstream first;
    write_dataset(first, d);
    const auto back = read_dataset(first).dataset;
    CHECK(back.unit_ids == d.unit_ids);
    CHECK(back.binary == d.binary);
    CHECK(same_bits(back.continuous.data(), d.continuous.data()));
    CHECK(back.treatment == d.treatment);
    CHECK(back.outcome == d.outcome);

    std::stringstream second;
    write_dataset(second, back);
    std::stringstream again;
    write_dataset(again, d);
    CHECK(second.str() == again.str());
}

TEST_CASE("design matrix puts binary attributes before covariates") {
    std::istringstream in("x_a,x_b,y_0,t,z\n1,0,2.5,1,0\n0,1,-1,0,1\n");
    const auto d = read_dataset(in).dataset;
    const auto X = d.design_matrix();
    CHECK(X.cols() == 3);
    CHECK(X.data() == std::vector{1.0, 0.0, 2.5, 0.0, 1.0, -1.0});
    CHECK(d.feature_names() == std::vector<std::string>{"x_a", "x_b", "y_0"});
}
