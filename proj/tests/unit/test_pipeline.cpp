#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fleetci/pipeline.hpp"
#include "fleetci/synthgen.hpp"
#include "helpers.hpp"

using namespace fleetci;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct CliRun {
    int code;
    std::string out, err;
};

CliRun run_cli(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(FLEETCI_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path simulate_to(const testutil::TempDir& dir, const std::string& scenario, std::size_t n, std::uint64_t seed) {
    SimulateConfig sim;
    sim.scenario = scenario;
    sim.n_units = n;
    sim.seed = seed;
    sim.out_dir = dir.path() / scenario;
    run_simulate(sim);
    return sim.out_dir / "dataset.csv";
}

PipelineConfig quick(const fs::path& dataset, const fs::path& out) {
    PipelineConfig c;
    c.dataset = dataset;
    c.out_dir = out;
    c.boost.rounds = 60;
    c.n_bags = 20;
    c.seed = 3;
    return c;
}

} // namespace

TEST_CASE("null effect is not significant") {
    testutil::TempDir dir("pipe-null");
    auto c = quick(simulate_to(dir, "null", 2000, 21), dir.path() / "out");
    const auto r = run_test(c);
    CHECK(r["schema"] == kReportSchema);
    CHECK(r["stage"] == "test");
    const auto& t = r["population_test"];
    CHECK_FALSE(t["population_effective"].get<bool>());
    CHECK(std::abs(r["cate"]["ate"].get<double>()) < 0.05);
    CHECK(fs::exists(dir.path() / "out" / "test.txt"));
    CHECK(fs::exists(dir.path() / "out" / "test.manifest.json"));
}

TEST_CASE("constant effect is significant and the report states the test") {
    testutil::TempDir dir("pipe-const");
    auto c = quick(simulate_to(dir, "constant", 2000, 22), dir.path() / "out");
    const auto r = run_test(c);
    const auto& t = r["population_test"];
    CHECK(t["population_effective"].get<bool>());
    CHECK(t["t_statistic"].get<double>() < t["critical_value"].get<double>());
    CHECK(t["alpha"].get<double>() == 0.05);
    CHECK(r["cate"]["ate"].get<double>() == doctest::Approx(-0.2).epsilon(0.25));
    const auto text = slurp(dir.path() / "out" / "test.txt");
    CHECK(text.find("critical t_{N-1,alpha}") != std::string::npos);
    CHECK(text.find("individually effective") != std::string::npos);
}

TEST_CASE("regularized constant-effect pipeline is promising and skips improvement") {
    testutil::TempDir dir("pipe-promising");
    auto c = quick(simulate_to(dir, "constant", 2000, 1000), dir.path() / "out");
    c.boost.rounds = 100;
    c.boost.max_depth = 2;
    c.boost.min_samples_leaf = 100;
    c.n_bags = 100;
    const auto r = run_pipeline(c);
    CHECK(r["verdict"]["promising"].get<bool>());
    CHECK(r["unit_tests"]["effective_fraction"].get<double>() >= 0.9);
    CHECK_FALSE(r.contains("improvement"));
    CHECK(r["verdict"]["promising_fraction"].get<double>() == 0.5);
    CHECK(slurp(dir.path() / "out" / "pipeline.txt").find("treatment promising") != std::string::npos);
}

TEST_CASE("treatment that fails on x_2 is not promising and x_2 leads the improvement list") {
    testutil::TempDir dir("pipe-fails");
    auto c = quick(simulate_to(dir, "fails-on-x2", 4000, 23), dir.path() / "out");
    c.boost.rounds = 200;
    c.target_feature = "x_2";
    c.target_direction = Direction::NextCause;
    const auto r = run_pipeline(c);
    CHECK_FALSE(r["verdict"]["promising"].get<bool>());
    REQUIRE(r.contains("improvement"));
    CHECK(r["improvement"]["next_treatment_candidates"][0] == "x_2");
    CHECK(r["improvement"]["target"]["rank_in_good_direction"] == 1);
    CHECK(fs::exists(dir.path() / "out" / "intervals.csv"));
    CHECK(fs::exists(dir.path() / "out" / "root_cause.csv"));
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
    testutil::TempDir dir("pipe-determinism");
    const auto data = simulate_to(dir, "works-on-x1", 800, 24);
    auto a = quick(data, dir.path() / "a");
    auto b = quick(data, dir.path() / "b");
    a.threads = 1;
    b.threads = 2;
    a.boost.subsample = b.boost.subsample = 0.8;
    run_pipeline(a);
    run_pipeline(b);
    auto sa = slurp(dir.path() / "a" / "pipeline.json"), sb = slurp(dir.path() / "b" / "pipeline.json");
    // The only difference is the output directory echoed in the config; the
    // report itself does not carry it.
    CHECK(sa == sb);
    CHECK(slurp(dir.path() / "a" / "intervals.csv") == slurp(dir.path() / "b" / "intervals.csv"));
}

TEST_CASE("cate export can be reused by later stages") {
    testutil::TempDir dir("pipe-cate");
    auto c = quick(simulate_to(dir, "constant", 600, 25), dir.path() / "out");
    const auto first = run_cate(c);
    auto reuse = c;
    reuse.cate_file = dir.path() / "out" / "cate.csv";
    reuse.out_dir = dir.path() / "out2";
    const auto t = run_test(reuse);
    CHECK(t["cate"]["source"] == "file");
    CHECK(t["population_test"]["sample_mean"].get<double>() ==
          doctest::Approx(first["cate"]["ate"].get<double>()).epsilon(1e-12));
}

TEST_CASE("invalid configuration is rejected before any work") {
    PipelineConfig c;
    c.dataset = "whatever.csv";
    c.alpha = 0.7;
    CHECK_THROWS_AS(run_test(c), InputError);
    c.alpha = 0.05;
    c.n_bags = 1;
    CHECK_THROWS_AS(run_test(c), InputError);
}

TEST_CASE("cli: missing dataset exits 2 and names the path") {
    testutil::TempDir dir("cli-missing");
    const auto r = run_cli("test --dataset /nonexistent/fleet.csv --out-dir " + (dir.path() / "o").string(), dir.path());
    CHECK(r.code == 2);
    CHECK(r.err.find("/nonexistent/fleet.csv") != std::string::npos);
    CHECK(run_cli("test --bogus-flag 1", dir.path()).code == 2);
    CHECK(run_cli("", dir.path()).code == 2);
}

TEST_CASE("cli: empty treatment arm exits 3") {
    testutil::TempDir dir("cli-arm");
    const auto data = simulate_to(dir, "constant", 200, 26);
    std::ifstream in(data);
    std::ofstream out(dir.path() / "all_control.csv");
    std::string header, line;
    std::getline(in, header);
    out << header << '\n';
    std::vector<std::string> cols;
    {
        std::stringstream h(header);
        std::string cell;
        while (std::getline(h, cell, ',')) cols.push_back(cell);
    }
    const auto t_col = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), "t") - cols.begin());
    REQUIRE(t_col < cols.size());
    while (std::getline(in, line)) {
        std::stringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        cells[t_col] = "0";
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    }
    out.close();
    const auto r = run_cli("cate --dataset " + (dir.path() / "all_control.csv").string() + " --out-dir " +
                               (dir.path() / "o").string(),
                           dir.path());
    CHECK(r.code == 3);
    CHECK(r.err.find("empty treatment arm") != std::string::npos);
}

TEST_CASE("cli: config file supplies defaults and flags override it") {
    testutil::TempDir dir("cli-config");
    const auto data = simulate_to(dir, "constant", 400, 27);
    {
        std::ofstream cfg(dir.path() / "run.cfg");
        cfg << "# test settings\n"
            << "dataset=" << data.string() << "\n"
            << "rounds=20\n"
            << "alpha=0.01\n"
            << "n_bags=7\n";
    }
    const auto out = dir.path() / "o";
    const auto r = run_cli("test --config " + (dir.path() / "run.cfg").string() + " --alpha 0.1 --out-dir " +
                               out.string(),
                           dir.path());
    REQUIRE(r.code == 0);
    const auto manifest = nlohmann::json::parse(slurp(out / "test.manifest.json"));
    CHECK(manifest["config"]["alpha"].get<double>() == 0.1);
    CHECK(manifest["config"]["rounds"] == 20);
    CHECK(manifest["config"]["n_bags"] == 7);
    CHECK(manifest.contains("timings_seconds"));
    const auto report = nlohmann::json::parse(slurp(out / "test.json"));
    CHECK_FALSE(report.contains("timings_seconds"));
    CHECK(r.out.find("t = ") != std::string::npos);
}

TEST_CASE("cli: simulate writes the dataset and ground truth") {
    testutil::TempDir dir("cli-sim");
    const auto r = run_cli("simulate --scenario null --units 50 --seed 4 --out-dir " + dir.path().string(), dir.path());
    CHECK(r.code == 0);
    CHECK(fs::exists(dir.path() / "dataset.csv"));
    CHECK(slurp(dir.path() / "ground_truth.csv").starts_with("unit_id,true_cate\n"));
    CHECK(run_cli("simulate --scenario nope --out-dir " + dir.path().string(), dir.path()).code == 2);
}
