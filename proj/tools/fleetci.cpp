// fleetci: command-line front end for the find-fix-track causal pipeline.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fleetci/pipeline.hpp"

namespace {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kInputError = 2,
    kDegenerate = 3,
    kConvergence = 4,
};

struct Flags {
    fleetci::PipelineConfig config;
    std::string schema, cate_file, target, propensity = "logistic", second_level = "gbt", direction = "addressed";
};

void add_pipeline_flags(CLI::App& cmd, Flags& f) {
    auto& c = f.config;
    cmd.add_option("--dataset", c.dataset, "Delimited fleet file")->required();
    cmd.add_option("--schema", f.schema, "Sidecar schema (column=kind per line)");
    cmd.add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
    cmd.add_option("--threshold", c.filter_threshold, "Correlation cutoff for feature elimination")->capture_default_str();
    cmd.add_option("--rounds", c.boost.rounds, "Boosting rounds")->capture_default_str();
    cmd.add_option("--max-depth", c.boost.max_depth, "Tree depth")->capture_default_str();
    cmd.add_option("--learning-rate", c.boost.learning_rate, "Shrinkage")->capture_default_str();
    cmd.add_option("--min-samples-leaf", c.boost.min_samples_leaf, "Minimum rows per leaf")->capture_default_str();
    cmd.add_option("--subsample", c.boost.subsample, "Row fraction per boosting round")->capture_default_str();
    cmd.add_option("--propensity", f.propensity, "Propensity learner: logistic | gbt")->capture_default_str();
    cmd.add_option("--logistic-l2", c.logistic_l2, "L2 penalty of the logistic propensity model")->capture_default_str();
    cmd.add_option("--second-level", f.second_level, "Second-level learner: gbt | ridge")->capture_default_str();
    cmd.add_option("--ridge-l2", c.ridge_l2, "L2 penalty of the ridge second-level model")->capture_default_str();
    cmd.add_option("--top-m", c.top_m, "Number of suggested features")->capture_default_str();
    cmd.add_option("--alpha", c.alpha, "Significance level")->capture_default_str();
    cmd.add_option("--n-bags", c.n_bags, "Bootstrap bags")->capture_default_str();
    cmd.add_option("--promising-fraction", c.promising_fraction,
                   "Share of individually effective units required for a promising verdict")
        ->capture_default_str();
    cmd.add_option("--seed", c.seed, "Master seed")->capture_default_str();
    cmd.add_option("--target", f.target, "Evaluation target attribute for the good-direction rank");
    cmd.add_option("--direction", f.direction, "Target direction: addressed | next-cause")->capture_default_str();
    cmd.add_option("--cate-file", f.cate_file, "Reuse an exported unit_id,cate table (test, improve)");
    cmd.add_option("--threads", c.threads, "Worker threads (0 = all cores); results do not depend on it")
        ->capture_default_str();
}

// Expands `--config FILE` into `--key value` pairs placed directly after the
// subcommand, so that flags given on the command line (parsed later, last
// value wins) take precedence over the file.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::vector<std::string> from_file;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        } else if (args[i].starts_with("--config=")) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            continue;
        }
        std::ifstream in(path);
        if (!in) throw fleetci::InputError("cannot read config file '" + path + "'");
        std::string line;
        while (std::getline(in, line)) {
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw fleetci::InputError("config line without '=': " + line);
            auto trim = [](std::string v) {
                const auto first = v.find_first_not_of(" \t\r");
                if (first == std::string::npos) return std::string{};
                return v.substr(first, v.find_last_not_of(" \t\r") - first + 1);
            };
            std::string key = trim(line.substr(0, eq));
            std::replace(key.begin(), key.end(), '_', '-');
            const std::string value = trim(line.substr(eq + 1));
            if (key == "drift") {
                if (value == "true" || value == "1") from_file.push_back("--drift");
                continue;
            }
            from_file.push_back("--" + key);
            from_file.push_back(value);
        }
        --i;
    }
    if (!from_file.empty() && !args.empty())
        args.insert(args.begin() + 1, from_file.begin(), from_file.end());
    return args;
}

fleetci::PipelineConfig finalize(Flags& f) {
    auto c = f.config;
    if (!f.schema.empty()) c.schema = f.schema;
    if (!f.cate_file.empty()) c.cate_file = f.cate_file;
    if (!f.target.empty()) c.target_feature = f.target;
    c.propensity = fleetci::parse_propensity_learner(f.propensity);
    c.second_level = fleetci::parse_second_level_learner(f.second_level);
    c.target_direction = fleetci::parse_direction(f.direction);
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fleetci: root-cause screening, treatment-effect testing and treatment refinement"};
    app.footer("Any subcommand accepts --config FILE with key=value lines (keys are flag names);\n"
               "flags given on the command line take precedence.");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    Flags flags;
    fleetci::SimulateConfig sim;
    std::string stage;

    struct Stage {
        const char* name;
        const char* help;
    };
    for (auto s : {Stage{"filter", "Eliminate highly correlated binary attributes"},
                   Stage{"root-cause", "Rank attributes by their effect on the outcome"},
                   Stage{"cate", "Estimate per-unit treatment effects with the X-learner"},
                   Stage{"test", "Population t-test and per-unit bootstrap intervals"},
                   Stage{"improve", "Rank attributes by their effect on the treatment effect"},
                   Stage{"pipeline", "Run one full iteration and report a verdict"}}) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        add_pipeline_flags(*cmd, flags);
        cmd->callback([&stage, name = std::string(s.name)] { stage = name; });
    }
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic fleet with known ground truth");
    simulate->add_option("--scenario", sim.scenario, "null | constant | works-on-x1 | fails-on-x2 | root-cause")
        ->capture_default_str();
    simulate->add_option("--units", sim.n_units, "Number of units")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Seed")->capture_default_str();
    simulate->add_option("--missing-rate", sim.missing_rate, "Share of continuous cells blanked")->capture_default_str();
    simulate->add_flag("--drift", sim.covariate_drift, "Re-draw treated units' covariates after treatment");
    simulate->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();
    simulate->callback([&stage] { stage = "simulate"; });

    try {
        auto args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const fleetci::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        nlohmann::json report;
        if (stage == "simulate") {
            report = fleetci::run_simulate(sim);
            std::cout << "wrote " << (sim.out_dir / "dataset.csv").string() << " (true ATE "
                      << report["true_ate"].get<double>() << ")\n";
            return kOk;
        }
        const auto config = finalize(flags);
        if (stage == "filter") report = fleetci::run_filter(config);
        else if (stage == "root-cause") report = fleetci::run_rootcause(config);
        else if (stage == "cate") report = fleetci::run_cate(config);
        else if (stage == "test") report = fleetci::run_test(config);
        else if (stage == "improve") report = fleetci::run_improve(config);
        else report = fleetci::run_pipeline(config);

        std::ifstream text(config.out_dir / (report["stage"].get<std::string>() + ".txt"));
        std::cout << text.rdbuf();
        if (report.contains("warnings"))
            for (const auto& w : report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
        return kOk;
    } catch (const fleetci::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const fleetci::DegenerateDataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDegenerate;
    } catch (const fleetci::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInternal;
    }
}
