#include "fleetci/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "fleetci/synthgen.hpp"

namespace fleetci {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

class StageTimer {
public:
    void mark(const std::string& stage) {
        const auto now = Clock::now();
        timings_[stage] = std::chrono::duration<double>(now - last_).count();
        last_ = now;
    }
    const json& timings() const { return timings_; }

private:
    Clock::time_point last_ = Clock::now();
    json timings_ = json::object();
};

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    return out;
}

void prepare_out_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

void write_json(const std::filesystem::path& path, const json& doc) {
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
}

// Dataset plus the representative-filtered view every later stage uses.
struct StageInput {
    LoadResult loaded;
    RepresentativeMap map;
    FleetDataset reduced;
};

StageInput prepare(const PipelineConfig& config) {
    config.validate();
    set_max_threads(config.threads);
    StageInput in;
    std::optional<ColumnSchema> schema;
    if (config.schema) schema = ColumnSchema::from_file(*config.schema);
    in.loaded = load_dataset(config.dataset, schema);
    in.map = eliminate_correlated(in.loaded.dataset, config.filter_threshold);
    in.reduced = in.loaded.dataset.select_binary(in.map.representatives);
    return in;
}

json dataset_json(const StageInput& in) {
    const auto& d = in.loaded.dataset;
    std::size_t treated = 0, failures = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        treated += d.treatment[k];
        failures += d.outcome[k];
    }
    return {{"rows", d.size()},
            {"dropped_rows", in.loaded.dropped_rows},
            {"imputed_columns", in.loaded.imputed_columns},
            {"n_binary", d.n_binary()},
            {"n_continuous", d.n_continuous()},
            {"treated", treated},
            {"outcome_positive", failures}};
}

json filter_json(const StageInput& in) {
    const auto& names = in.loaded.dataset.binary_names;
    json features = json::array();
    for (std::size_t f = 0; f < names.size(); ++f)
        features.push_back({{"feature", names[f]},
                            {"representative", names[in.map.assignment[f]]},
                            {"mutual_information", in.map.mi_scores[f]},
                            {"constant", static_cast<bool>(in.map.constant[f])}});
    json reps = json::array();
    for (auto r : in.map.representatives) reps.push_back(names[r]);
    return {{"threshold", in.map.threshold}, {"representatives", reps}, {"features", features}};
}

json ranking_json(const EffectRanking& ranking, const StageInput& in) {
    const auto& original = in.loaded.dataset.binary_names;
    json rows = json::array();
    for (std::size_t pos = 0; pos < ranking.order.size(); ++pos) {
        const std::size_t f = ranking.order[pos];
        json group = json::array();
        for (auto m : in.map.group(in.map.representatives[f])) group.push_back(original[m]);
        rows.push_back({{"rank", pos + 1}, {"feature", ranking.names[f]}, {"effect", ranking.effects[f]}, {"group", group}});
    }
    return rows;
}

json names_of(const std::vector<std::size_t>& idx, const EffectRanking& ranking) {
    json out = json::array();
    for (auto f : idx) out.push_back(ranking.names[f]);
    return out;
}

json test_json(const TestReport& t) {
    return {{"sample_mean", t.sample_mean},   {"sample_sd", t.sample_sd},
            {"n_samples", t.n_samples},       {"t_statistic", t.t_statistic},
            {"critical_value", t.critical_value}, {"alpha", t.alpha},
            {"population_effective", t.population_effective}};
}

std::vector<double> obtain_cate(const PipelineConfig& config, const StageInput& in, json& section,
                                std::vector<std::string>& warnings) {
    if (config.cate_file) {
        std::ifstream f(*config.cate_file);
        if (!f) throw InputError("cannot read CATE file '" + config.cate_file->string() + "'");
        section["source"] = "file";
        return read_cate_table(f, in.reduced);
    }
    const CateResult result = estimate_cate(in.reduced, config.xlearner());
    warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
    section["source"] = "x-learner";
    section["propensity_learner"] = to_string(config.propensity);
    section["ate"] = average_treatment_effect(result);
    auto out = open_output(config.out_dir / "cate.csv");
    write_cate_table(out, in.reduced, result);
    return result.cate;
}

struct ImprovementOutcome {
    json section;
    std::string text;
};

ImprovementOutcome improvement_section(const PipelineConfig& config, const StageInput& in,
                                       std::span<const double> cate) {
    const auto h = fit_second_level(in.reduced, cate, config.second_level_config());
    const EffectRanking ranking = estimate_treatment_modifiers(h, in.reduced, config.top_m);
    {
        auto out = open_output(config.out_dir / "modifiers.csv");
        write_modifier_table(out, ranking);
    }
    ImprovementOutcome o;
    o.section = {{"learner", to_string(config.second_level)},
                 {"ranking", ranking_json(ranking, in)},
                 {"next_treatment_candidates", names_of(next_treatment_candidates(ranking, config.top_m), ranking)},
                 {"addressed_by_treatment", names_of(addressed_features(ranking, config.top_m), ranking)}};
    std::ostringstream text;
    text << "Treatment modifiers (second level, top_m = " << config.top_m << ")\n";
    for (std::size_t pos = 0; pos < ranking.order.size(); ++pos) {
        const auto f = ranking.order[pos];
        const double e = ranking.effects[f];
        text << "  " << pos + 1 << ". " << ranking.names[f] << "  " << format_real(e) << "  "
             << (e > 0 ? "candidate next cause" : e < 0 ? "addressed by treatment" : "neutral") << '\n';
    }
    if (config.target_feature) {
        const auto& original = in.loaded.dataset.binary_names;
        auto it = std::find(original.begin(), original.end(), *config.target_feature);
        if (it == original.end()) throw InputError("target feature '" + *config.target_feature + "' not in dataset");
        const std::size_t rep = in.map.assignment[static_cast<std::size_t>(it - original.begin())];
        const auto rep_pos = static_cast<std::size_t>(
            std::find(in.map.representatives.begin(), in.map.representatives.end(), rep) - in.map.representatives.begin());
        const auto rank = rank_in_good_direction(ranking, rep_pos, config.target_direction);
        o.section["target"] = {{"feature", *config.target_feature},
                               {"representative", original[rep]},
                               {"direction", to_string(config.target_direction)},
                               {"rank_in_good_direction", rank}};
        text << "Target " << *config.target_feature << " ranks " << rank << " in the "
             << to_string(config.target_direction) << " direction\n";
    }
    o.text = text.str();
    return o;
}

json finish(const PipelineConfig& config, const std::string& stage, json report, const std::string& text,
            const StageTimer& timer) {
    report["schema"] = kReportSchema;
    report["stage"] = stage;
    write_json(config.out_dir / (stage + ".json"), report);
    {
        auto out = open_output(config.out_dir / (stage + ".txt"));
        out << text;
    }
    write_json(config.out_dir / (stage + ".manifest.json"),
               {{"schema", kReportSchema}, {"stage", stage}, {"config", config.to_json()}, {"seed", config.seed},
                {"timings_seconds", timer.timings()}});
    return report;
}

std::string test_text(const TestReport& t, const BootstrapResult* boot) {
    std::ostringstream s;
    s << "Population t-test (H0: ATE >= 0 vs H1: ATE < 0)\n"
      << "  N = " << t.n_samples << ", mean = " << format_real(t.sample_mean) << ", sd = " << format_real(t.sample_sd)
      << '\n'
      << "  t = " << format_real(t.t_statistic) << ", critical t_{N-1,alpha} = " << format_real(t.critical_value)
      << " (alpha = " << t.alpha << ")\n"
      << "  " << (t.population_effective ? "significant: treatment effective over the population"
                                         : "not significant")
      << '\n';
    if (boot)
        s << "Per-unit bootstrap intervals: " << format_real(boot->effective_fraction())
          << " of units individually effective (ub < 0)\n";
    return s.str();
}

json warnings_json(const std::vector<std::string>& warnings) {
    // Bag-level repeats are summarised so reports stay small.
    std::vector<std::string> uniq;
    std::size_t bag_warnings = 0;
    for (const auto& w : warnings) {
        if (w.starts_with("bag ")) {
            ++bag_warnings;
            continue;
        }
        if (std::find(uniq.begin(), uniq.end(), w) == uniq.end()) uniq.push_back(w);
    }
    if (bag_warnings > 0) uniq.push_back(std::to_string(bag_warnings) + " bootstrap bag warning(s)");
    return uniq;
}

} // namespace

void PipelineConfig::validate() const {
    if (!(filter_threshold > 0.0 && filter_threshold <= 1.0)) throw InputError("filter threshold must be in (0,1]");
    if (!(alpha > 0.0 && alpha < 0.5)) throw InputError("alpha must be in (0, 0.5)");
    if (n_bags < 2) throw InputError("n_bags must be >= 2");
    if (top_m < 1) throw InputError("top_m must be >= 1");
    if (!(promising_fraction >= 0.0 && promising_fraction <= 1.0))
        throw InputError("promising fraction must be in [0,1]");
    boost.validate();
}

XLearnerConfig PipelineConfig::xlearner() const {
    XLearnerConfig x;
    x.boost = boost;
    x.boost.rng_seed = seed;
    x.propensity = propensity;
    x.logistic_l2 = logistic_l2;
    return x;
}

SecondLevelConfig PipelineConfig::second_level_config() const {
    SecondLevelConfig s;
    s.learner = second_level;
    s.boost = boost;
    s.boost.rng_seed = seed;
    s.ridge_l2 = ridge_l2;
    return s;
}

json PipelineConfig::to_json() const {
    json j = {{"dataset", dataset.string()},
              {"out_dir", out_dir.string()},
              {"filter_threshold", filter_threshold},
              {"rounds", boost.rounds},
              {"max_depth", boost.max_depth},
              {"learning_rate", boost.learning_rate},
              {"min_samples_leaf", boost.min_samples_leaf},
              {"subsample", boost.subsample},
              {"propensity", to_string(propensity)},
              {"logistic_l2", logistic_l2},
              {"second_level", to_string(second_level)},
              {"ridge_l2", ridge_l2},
              {"top_m", top_m},
              {"alpha", alpha},
              {"n_bags", n_bags},
              {"promising_fraction", promising_fraction},
              {"seed", seed},
              {"target_direction", to_string(target_direction)}};
    j["schema_file"] = schema ? json(schema->string()) : json(nullptr);
    j["cate_file"] = cate_file ? json(cate_file->string()) : json(nullptr);
    j["target_feature"] = target_feature ? json(*target_feature) : json(nullptr);
    return j;
}

json run_filter(const PipelineConfig& config) {
    StageTimer timer;
    const StageInput in = prepare(config);
    prepare_out_dir(config.out_dir);
    timer.mark("filter");
    {
        auto out = open_output(config.out_dir / "representatives.csv");
        write_representative_table(out, in.map, in.loaded.dataset.binary_names);
    }
    std::ostringstream text;
    text << "Correlated-feature elimination (threshold " << config.filter_threshold << ")\n"
         << "  " << in.loaded.dataset.n_binary() << " binary attributes -> " << in.map.representatives.size()
         << " representatives\n";
    return finish(config, "filter", {{"dataset", dataset_json(in)}, {"filter", filter_json(in)}}, text.str(), timer);
}

json run_rootcause(const PipelineConfig& config) {
    StageTimer timer;
    const StageInput in = prepare(config);
    prepare_out_dir(config.out_dir);
    timer.mark("filter");
    const TreeEnsemble f = fit_outcome_model(in.reduced, config.boost);
    const EffectRanking ranking = estimate_attribute_effects(f, in.reduced, config.top_m);
    timer.mark("root_cause");
    {
        auto out = open_output(config.out_dir / "outcome_model.txt");
        write_ensemble(out, f);
    }
    {
        auto out = open_output(config.out_dir / "root_cause.csv");
        write_effect_table(out, ranking, &in.map, &in.loaded.dataset.binary_names);
    }
    const auto suggested = suggest_root_causes(ranking, config.top_m);
    std::ostringstream text;
    text << "Root-cause screening: suggested causes (top_m = " << config.top_m << ")\n";
    for (auto s : suggested) text << "  " << ranking.names[s] << "  " << format_real(ranking.effects[s]) << '\n';
    if (suggested.empty()) text << "  (no attribute with a positive effect)\n";
    json report = {{"dataset", dataset_json(in)},
                   {"filter", filter_json(in)},
                   {"root_cause", {{"ranking", ranking_json(ranking, in)}, {"suggested", names_of(suggested, ranking)}}}};
    return finish(config, "root-cause", std::move(report), text.str(), timer);
}

json run_cate(const PipelineConfig& config) {
    StageTimer timer;
    const StageInput in = prepare(config);
    prepare_out_dir(config.out_dir);
    timer.mark("filter");
    const CateResult result = estimate_cate(in.reduced, config.xlearner());
    timer.mark("cate");
    {
        auto out = open_output(config.out_dir / "cate.csv");
        write_cate_table(out, in.reduced, result);
    }
    const double ate = average_treatment_effect(result);
    json report = {{"dataset", dataset_json(in)},
                   {"cate", {{"ate", ate}, {"propensity_learner", to_string(config.propensity)}}},
                   {"warnings", warnings_json(result.warnings)}};
    std::ostringstream text;
    text << "X-learner CATE: ATE = " << format_real(ate) << " over " << in.reduced.size() << " units\n";
    return finish(config, "cate", std::move(report), text.str(), timer);
}

json run_test(const PipelineConfig& config) {
    StageTimer timer;
    const StageInput in = prepare(config);
    prepare_out_dir(config.out_dir);
    timer.mark("filter");
    std::vector<std::string> warnings;
    json cate_section;
    const auto cate = obtain_cate(config, in, cate_section, warnings);
    timer.mark("cate");
    const TestReport t = population_t_test(cate, config.alpha);
    const BootstrapResult boot = bootstrap_unit_intervals(
        in.reduced, config.xlearner(), {.n_bags = config.n_bags, .alpha = config.alpha, .master_seed = config.seed});
    timer.mark("bootstrap");
    {
        auto out = open_output(config.out_dir / "intervals.csv");
        write_interval_table(out, boot.intervals);
    }
    warnings.insert(warnings.end(), boot.warnings.begin(), boot.warnings.end());
    json report = {{"dataset", dataset_json(in)},
                   {"cate", cate_section},
                   {"population_test", test_json(t)},
                   {"unit_tests",
                    {{"n_bags", config.n_bags},
                     {"interval_level", 1.0 - 2.0 * config.alpha},
                     {"effective_fraction", boot.effective_fraction()},
                     {"redraws", boot.redraws}}},
                   {"warnings", warnings_json(warnings)}};
    return finish(config, "test", std::move(report), test_text(t, &boot), timer);
}

json run_improve(const PipelineConfig& config) {
    StageTimer timer;
    const StageInput in = prepare(config);
    prepare_out_dir(config.out_dir);
    timer.mark("filter");
    std::vector<std::string> warnings;
    json cate_section;
    const auto cate = obtain_cate(config, in, cate_section, warnings);
    timer.mark("cate");
    auto improvement = improvement_section(config, in, cate);
    timer.mark("improve");
    json report = {{"dataset", dataset_json(in)},
                   {"cate", cate_section},
                   {"improvement", improvement.section},
                   {"warnings", warnings_json(warnings)}};
    return finish(config, "improve", std::move(report), improvement.text, timer);
}

json run_pipeline(const PipelineConfig& config) {
    StageTimer timer;
    const StageInput in = prepare(config);
    prepare_out_dir(config.out_dir);
    timer.mark("filter");
    {
        auto out = open_output(config.out_dir / "representatives.csv");
        write_representative_table(out, in.map, in.loaded.dataset.binary_names);
    }

    const TreeEnsemble f = fit_outcome_model(in.reduced, config.boost);
    const EffectRanking causes = estimate_attribute_effects(f, in.reduced, config.top_m);
    {
        auto out = open_output(config.out_dir / "root_cause.csv");
        write_effect_table(out, causes, &in.map, &in.loaded.dataset.binary_names);
    }
    timer.mark("root_cause");

    std::vector<std::string> warnings;
    json cate_section;
    const auto cate = obtain_cate(config, in, cate_section, warnings);
    timer.mark("cate");

    const TestReport t = population_t_test(cate, config.alpha);
    const BootstrapResult boot = bootstrap_unit_intervals(
        in.reduced, config.xlearner(), {.n_bags = config.n_bags, .alpha = config.alpha, .master_seed = config.seed});
    {
        auto out = open_output(config.out_dir / "intervals.csv");
        write_interval_table(out, boot.intervals);
    }
    warnings.insert(warnings.end(), boot.warnings.begin(), boot.warnings.end());
    timer.mark("test");

    const double fraction = boot.effective_fraction();
    const bool promising = t.population_effective && fraction >= config.promising_fraction;

    json report = {
        {"dataset", dataset_json(in)},
        {"filter", filter_json(in)},
        {"root_cause", {{"ranking", ranking_json(causes, in)}, {"suggested", names_of(suggest_root_causes(causes, config.top_m), causes)}}},
        {"cate", cate_section},
        {"population_test", test_json(t)},
        {"unit_tests",
         {{"n_bags", config.n_bags},
          {"interval_level", 1.0 - 2.0 * config.alpha},
          {"effective_fraction", fraction},
          {"redraws", boot.redraws}}},
        {"verdict",
         {{"promising", promising},
          {"rule", "population_effective && effective_fraction >= promising_fraction"},
          {"population_effective", t.population_effective},
          {"effective_fraction", fraction},
          {"promising_fraction", config.promising_fraction}}}};

    std::ostringstream text;
    text << "Suggested root causes:";
    for (auto s : suggest_root_causes(causes, config.top_m)) text << ' ' << causes.names[s];
    text << '\n' << test_text(t, &boot);
    text << "Verdict: " << (promising ? "treatment promising" : "treatment not promising") << '\n';
    if (!promising) {
        auto improvement = improvement_section(config, in, cate);
        report["improvement"] = improvement.section;
        text << "Heuristics to develop a new treatment:\n" << improvement.text;
        timer.mark("improve");
    }
    report["warnings"] = warnings_json(warnings);
    return finish(config, "pipeline", std::move(report), text.str(), timer);
}

json run_simulate(const SimulateConfig& config) {
    ScenarioConfig sc = scenarios::by_name(config.scenario, config.n_units, config.seed);
    sc.missing_rate = config.missing_rate;
    sc.covariate_drift = config.covariate_drift;
    const Scenario s = generate(sc);
    prepare_out_dir(config.out_dir);
    save_dataset(config.out_dir / "dataset.csv", s.dataset);
    {
        auto out = open_output(config.out_dir / "ground_truth.csv");
        write_ground_truth(out, s.dataset, s.truth);
    }
    auto names = [&](const std::vector<std::size_t>& idx) {
        json a = json::array();
        for (auto i : idx) a.push_back(s.dataset.binary_names[i]);
        return a;
    };
    json report = {{"schema", kReportSchema},
                   {"stage", "simulate"},
                   {"scenario", config.scenario},
                   {"n_units", config.n_units},
                   {"seed", config.seed},
                   {"true_ate", s.truth.true_ate},
                   {"true_cause_set", names(s.truth.true_cause_set)},
                   {"true_modifier_set", names(s.truth.true_modifier_set)}};
    write_json(config.out_dir / "simulate.json", report);
    return report;
}

} // namespace fleetci
