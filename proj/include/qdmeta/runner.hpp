#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdmeta/damage_test.hpp"
#include "qdmeta/io.hpp"
#include "qdmeta/meta_loop.hpp"
#include "qdmeta/version.hpp"

namespace qdmeta {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConditionInfo {
    enum class Mode { Baseline, RandomMap, Meta };
    Mode mode = Mode::Baseline;
    BaselineKind baseline = BaselineKind::Position;
    FeatureMapKind feature_map = FeatureMapKind::Linear;
};

inline ConditionInfo parse_condition(const std::string& name) {
    using Mode = ConditionInfo::Mode;
    if (name == "position") return {Mode::Baseline, BaselineKind::Position, {}};
    if (name == "polar") return {Mode::Baseline, BaselineKind::Polar, {}};
    if (name == "jointpairangle") return {Mode::Baseline, BaselineKind::JointPairAngle, {}};
    if (name == "anglesum") return {Mode::Baseline, BaselineKind::AngleSum, {}};
    if (name.rfind("random-", 0) == 0)
        return {Mode::RandomMap, {}, feature_map_kind_from_string(name.substr(7))};
    if (name.rfind("meta-", 0) == 0)
        return {Mode::Meta, {}, feature_map_kind_from_string(name.substr(5))};
    throw UsageError("unknown condition: " + name);
}

/// Control strategy strings: "", "static-gen:25", "static-mr:0.25",
/// "anneal-gen", "anneal-mr", "endo-gen", "endo-mr", "rl-gen", "rl-mr".
inline ControlSpec parse_control(const std::string& text) {
    ControlSpec spec;
    if (text.empty()) return spec;

    std::string head = text;
    std::string value;
    if (const std::size_t colon = text.find(':'); colon != std::string::npos) {
        head = text.substr(0, colon);
        value = text.substr(colon + 1);
    }
    const std::size_t dash = head.find('-');
    if (dash == std::string::npos) throw UsageError("bad control spec: " + text);
    const std::string strategy = head.substr(0, dash);
    const std::string param = head.substr(dash + 1);

    if (param == "gen") spec.which = ControlledParamKind::GenerationsPerMetaGen;
    else if (param == "mr") spec.which = ControlledParamKind::MutationRate;
    else throw UsageError("bad control parameter (want gen|mr): " + text);

    using Strategy = ControlSpec::Strategy;
    if (strategy == "static") {
        spec.strategy = Strategy::Static;
        if (value.empty()) throw UsageError("static control needs a value: " + text);
        try {
            spec.static_setting = std::stod(value);
        } catch (const std::exception&) {
            throw UsageError("bad static control value: " + text);
        }
        static_value(spec.which, spec.static_setting); // range check now
    } else if (strategy == "anneal") {
        spec.strategy = Strategy::Anneal;
    } else if (strategy == "endo") {
        spec.strategy = Strategy::Endogenous;
    } else if (strategy == "rl") {
        spec.strategy = Strategy::Rl;
    } else {
        throw UsageError("bad control strategy: " + text);
    }
    if (!value.empty() && spec.strategy != Strategy::Static)
        throw UsageError("only static control takes a value: " + text);
    return spec;
}

inline std::string control_to_string(const ControlSpec& spec) {
    using Strategy = ControlSpec::Strategy;
    if (spec.strategy == Strategy::None) return "";
    const std::string param =
        spec.which == ControlledParamKind::GenerationsPerMetaGen ? "gen" : "mr";
    switch (spec.strategy) {
    case Strategy::Static: return "static-" + param + ":" + format_double(spec.static_setting);
    case Strategy::Anneal: return "anneal-" + param;
    case Strategy::Endogenous: return "endo-" + param;
    case Strategy::Rl: return "rl-" + param;
    default: return "";
    }
}

struct RunConfig {
    std::string condition = "polar";
    std::string control; // parse_control format; meta conditions only
    std::uint64_t budget = 200000;
    int batch_size = kDefaultBatchSize;
    int initial_population = kDefaultInitialPopulation;
    int lambda = 5;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "run";
    KBestDatabase::Config db;
};

inline nlohmann::json config_to_json(const RunConfig& config) {
    return {{"condition", config.condition},
            {"control", config.control},
            {"budget", config.budget},
            {"batch_size", config.batch_size},
            {"initial_population", config.initial_population},
            {"lambda", config.lambda},
            {"seed", config.seed},
            {"out", config.out_dir.string()},
            {"db_delta", config.db.delta},
            {"db_initial_k", config.db.initial_k},
            {"db_capacity", config.db.capacity}};
}

/// Key/value config file: JSON object, or flat `key = value` lines.
/// Values present in the file override the matching flags.
inline void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    nlohmann::json j;
    const std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        j = nlohmann::json::parse(text);
    } else {
        j = nlohmann::json::object();
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t eol = text.find('\n', pos);
            if (eol == std::string::npos) eol = text.size();
            std::string line = text.substr(pos, eol - pos);
            pos = eol + 1;
            if (const std::size_t hash = line.find('#'); hash != std::string::npos)
                line.resize(hash);
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                const std::size_t b = s.find_first_not_of(" \t\r\"");
                const std::size_t e = s.find_last_not_of(" \t\r\"");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) continue;
            try {
                if (value.find_first_not_of("0123456789") == std::string::npos &&
                    !value.empty())
                    j[key] = std::stoull(value);
                else
                    j[key] = value;
            } catch (const std::exception&) {
                j[key] = value;
            }
        }
    }

    auto maybe = [&](const char* key, auto& slot) {
        using T = std::decay_t<decltype(slot)>;
        if (!j.contains(key)) return;
        if constexpr (std::is_same_v<T, std::filesystem::path>)
            slot = j.at(key).get<std::string>();
        else if constexpr (std::is_arithmetic_v<T>) {
            if (j.at(key).is_string()) slot = static_cast<T>(std::stod(j.at(key).get<std::string>()));
            else slot = j.at(key).get<T>();
        } else
            slot = j.at(key).get<T>();
    };
    maybe("condition", config.condition);
    maybe("control", config.control);
    maybe("budget", config.budget);
    maybe("batch_size", config.batch_size);
    maybe("initial_population", config.initial_population);
    maybe("lambda", config.lambda);
    maybe("seed", config.seed);
    maybe("out", config.out_dir);
    maybe("db_delta", config.db.delta);
    maybe("db_initial_k", config.db.initial_k);
    maybe("db_capacity", config.db.capacity);
}

namespace detail {

inline std::vector<std::string> meta_metrics_header() {
    return {"meta_generation",      "evaluations",
            "coverage_mean",        "coverage_sd",
            "global_fitness_mean",  "global_fitness_sd",
            "average_fitness_mean", "average_fitness_sd",
            "meta_fitness_mean",    "meta_fitness_sd",
            "meta_fitness_max",     "generations_value",
            "mutation_rate_value",  "sigma"};
}

inline std::vector<std::string> row_to_fields(const MetaEvolution::GenerationRow& row) {
    return {std::to_string(row.meta_generation),
            std::to_string(row.evaluations),
            format_double(row.coverage_mean),
            format_double(row.coverage_sd),
            format_double(row.global_fitness_mean),
            format_double(row.global_fitness_sd),
            format_double(row.average_fitness_mean),
            format_double(row.average_fitness_sd),
            format_double(row.meta_fitness_mean),
            format_double(row.meta_fitness_sd),
            format_double(row.meta_fitness_max),
            format_double(row.generations_value),
            format_double(row.mutation_rate_value),
            format_double(row.sigma)};
}

inline void write_manifest(const RunConfig& config, const std::filesystem::path& dir,
                           const nlohmann::json& extra = {}) {
    nlohmann::json manifest;
    manifest["tool"] = "qdmeta";
    manifest["version"] = kVersion;
    manifest["config"] = config_to_json(config);
    if (!extra.is_null() && !extra.empty()) manifest["outputs"] = extra;
    write_json(dir / "manifest.json", manifest);
}

/// Plain MAP-Elites over a fixed behaviour space (baselines and random
/// feature-maps): no database, no meta-evolution.
inline void run_plain_map_elites(const RunConfig& config, const BehaviourSpace& space) {
    std::filesystem::create_directories(config.out_dir);
    Rng rng = make_rng(derive_seed(config.seed, 0xBA5E));
    BehaviourMap map = space.make_map();

    CsvWriter metrics(config.out_dir / "metrics.csv");
    metrics.write_row({"generation", "evaluations", "coverage", "global_fitness",
                       "average_fitness"});
    auto emit = [&](int generation, std::uint64_t evals) {
        const bool empty = map.empty();
        const BehaviourMap::Metrics m =
            empty ? BehaviourMap::Metrics{0, 0.0, 0.0} : map.metrics();
        metrics.write_row({std::to_string(generation), std::to_string(evals),
                           std::to_string(m.coverage), format_double(m.global_fitness),
                           format_double(m.average_fitness)});
    };

    std::uint64_t evals = seed_map(map, space, config.initial_population, rng);
    int generation = 0;
    emit(generation, evals);
    while (evals < config.budget) {
        evals += map_elites_iterations(map, space, 1, kDefaultMutationRate,
                                       config.batch_size, [](const SolutionRecord&) {}, rng);
        ++generation;
        emit(generation, evals);
    }
    metrics.flush();
    write_archive_jsonl(config.out_dir / "archive.jsonl", map);
}

inline void run_meta_evolution(const RunConfig& config, FeatureMapKind kind,
                               const ControlSpec& control) {
    std::filesystem::create_directories(config.out_dir);

    MetaEvolution::Params params;
    params.kind = kind;
    params.control = control;
    params.budget = config.budget;
    params.batch_size = config.batch_size;
    params.initial_population = config.initial_population;
    params.lambda = config.lambda;
    params.seed = config.seed;
    params.db = config.db;
    MetaEvolution run(params);

    CsvWriter metrics(config.out_dir / "metrics.csv");
    metrics.write_row(meta_metrics_header());
    while (!run.done()) {
        const MetaEvolution::GenerationRow row = run.step();
        metrics.write_row(row_to_fields(row));
    }
    metrics.flush();

    write_archive_jsonl(config.out_dir / "archive_mean.jsonl", run.mean_map());
    write_json(config.out_dir / "cma_state.json", cma_to_json(run.cma()));
    write_db_snapshot(config.out_dir / "database.qdb", run.database());

    if (control.strategy == ControlSpec::Strategy::Rl) {
        CsvWriter log(config.out_dir / "controller_log.csv");
        log.write_row({"meta_generation", "max_mf", "mean_mf", "std_mf", "diversity",
                       "stagnation", "last_reward", "action", "value", "reward", "leaf"});
        for (const MetaEvolution::RlLogRow& row : run.rl_log()) {
            log.write_row({std::to_string(row.meta_generation),
                           format_double(row.observation.max_mf),
                           format_double(row.observation.mean_mf),
                           format_double(row.observation.std_mf),
                           format_double(row.observation.diversity),
                           std::to_string(row.observation.stagnation),
                           format_double(row.observation.last_reward),
                           std::to_string(row.action), format_double(row.value),
                           format_double(row.reward), std::to_string(row.leaf)});
        }
    }
}

} // namespace detail

/// Executes one experimental condition to budget, writing metrics.csv, the
/// final archive(s), state snapshots, and a manifest into the output directory.
inline void run_evolve(const RunConfig& config) {
    const ConditionInfo info = parse_condition(config.condition);
    const ControlSpec control = parse_control(config.control);
    if (info.mode != ConditionInfo::Mode::Meta &&
        control.strategy != ControlSpec::Strategy::None)
        throw UsageError("--control applies to meta-* conditions only");
    if (config.batch_size < 1) throw UsageError("batch size must be positive");
    if (config.budget < static_cast<std::uint64_t>(config.initial_population))
        throw UsageError("budget must cover the initial population");

    std::filesystem::create_directories(config.out_dir);
    detail::write_manifest(config, config.out_dir);

    switch (info.mode) {
    case ConditionInfo::Mode::Baseline:
        detail::run_plain_map_elites(config, baseline_space(info.baseline));
        break;
    case ConditionInfo::Mode::RandomMap: {
        Rng rng = make_rng(derive_seed(config.seed, 0xF00D));
        const FeatureMapParams params = random_feature_map(info.feature_map, rng);
        write_json(config.out_dir / "feature_map.json", feature_map_to_json(params));
        detail::run_plain_map_elites(config, feature_map_space(params));
        break;
    }
    case ConditionInfo::Mode::Meta:
        detail::run_meta_evolution(config, info.feature_map, control);
        break;
    }
}

/// Damage-recovery test over an archive file; writes per-damage percentages
/// (CSV) and an aggregate summary (JSON) next to the archive or into out_dir.
inline DamageTestResult run_damage_test_files(const std::filesystem::path& archive_path,
                                              double tolerance, TargetGrid grid,
                                              std::optional<std::filesystem::path> out_dir) {
    const std::vector<Genotype> genotypes = read_archive_genotypes(archive_path);
    const DamageTestResult result = run_damage_test(genotypes, tolerance, grid);

    const std::filesystem::path dir =
        out_dir.value_or(archive_path.parent_path().empty() ? "."
                                                            : archive_path.parent_path());
    std::filesystem::create_directories(dir);

    CsvWriter csv(dir / "damage_test.csv");
    csv.write_row({"joint", "epsilon_rad", "pct_reached"});
    for (const DamageTestRow& row : result.rows)
        csv.write_row({std::to_string(row.joint), format_double(row.epsilon),
                       format_double(row.pct_reached)});

    nlohmann::json summary;
    summary["archive"] = archive_path.string();
    summary["tolerance"] = result.tolerance;
    summary["grid"] = {{"radial", result.grid.radial}, {"angular", result.grid.angular}};
    summary["mean_pct_reached"] = result.mean;
    summary["sd_pct_reached"] = result.sd;
    summary["archive_size"] = genotypes.size();
    write_json(dir / "damage_test.json", summary);
    return result;
}

// ---------------------------------------------------------------------------
// Cross-replicate summary.

struct RunSummary {
    std::string condition;
    int replicates = 0;
    double meta_fitness_mean = 0.0, meta_fitness_sd = 0.0;
    double coverage_mean = 0.0, coverage_sd = 0.0;
    double damage_mean = 0.0, damage_sd = 0.0;
    bool has_meta_fitness = false;
    bool has_damage = false;
};

namespace detail {

struct RunData {
    std::string condition;
    std::optional<double> final_meta_fitness; // mean over the last 10% of evaluations
    double final_coverage = 0.0;
    std::optional<double> damage_mean;
    std::vector<double> damage_rows; // per-damage percentages
};

inline std::optional<RunData> load_run(const std::filesystem::path& manifest_path) {
    const nlohmann::json manifest = read_json(manifest_path);
    const std::filesystem::path dir = manifest_path.parent_path();
    RunData data;
    data.condition = manifest.at("config").at("condition").get<std::string>();
    const std::string control = manifest.at("config").value("control", std::string());
    if (!control.empty()) data.condition += "+" + control;

    const std::filesystem::path metrics_path = dir / "metrics.csv";
    if (!std::filesystem::exists(metrics_path)) return std::nullopt;
    const CsvTable metrics = read_csv(metrics_path);
    if (metrics.rows.empty()) return std::nullopt;

    const bool is_meta = !metrics.header.empty() && metrics.header[0] == "meta_generation";
    const int eval_col = metrics.column("evaluations");
    const std::uint64_t final_evals = std::stoull(metrics.rows.back()[eval_col]);
    if (is_meta) {
        const int mf_col = metrics.column("meta_fitness_mean");
        const int cov_col = metrics.column("coverage_mean");
        double acc = 0.0;
        int count = 0;
        for (const auto& row : metrics.rows) {
            if (std::stoull(row[eval_col]) * 10 >= final_evals * 9) {
                acc += std::stod(row[mf_col]);
                ++count;
            }
        }
        data.final_meta_fitness = count ? acc / count : std::stod(metrics.rows.back()[mf_col]);
        data.final_coverage = std::stod(metrics.rows.back()[cov_col]);
    } else {
        data.final_coverage = std::stod(metrics.rows.back()[metrics.column("coverage")]);
    }

    const std::filesystem::path damage_path = dir / "damage_test.json";
    if (std::filesystem::exists(damage_path)) {
        data.damage_mean = read_json(damage_path).at("mean_pct_reached").get<double>();
        const std::filesystem::path rows_path = dir / "damage_test.csv";
        if (std::filesystem::exists(rows_path)) {
            const CsvTable rows = read_csv(rows_path);
            const int pct = rows.column("pct_reached");
            for (const auto& row : rows.rows) data.damage_rows.push_back(std::stod(row[pct]));
        }
    }
    return data;
}

} // namespace detail

/// Aggregates all completed runs under `dir` by condition: mean +- sd of the
/// final meta-fitness (averaged over the last 10% of evaluations), final
/// coverage, and damage-test aggregates. Writes summary.json and summary.csv.
inline std::vector<RunSummary> export_summary(const std::filesystem::path& dir) {
    std::map<std::string, std::vector<detail::RunData>> groups;
    if (std::filesystem::exists(dir)) {
        for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().filename() == "manifest.json") {
                if (auto run = detail::load_run(entry.path()))
                    groups[run->condition].push_back(std::move(*run));
            }
        }
    }
    if (groups.empty()) throw std::runtime_error("export_summary: no completed runs found");

    std::vector<RunSummary> summaries;
    nlohmann::json out_json;
    for (const auto& [condition, runs] : groups) {
        RunSummary s;
        s.condition = condition;
        s.replicates = static_cast<int>(runs.size());

        std::vector<double> coverage, meta_fitness, damage;
        for (const detail::RunData& run : runs) {
            coverage.push_back(run.final_coverage);
            if (run.final_meta_fitness) meta_fitness.push_back(*run.final_meta_fitness);
            if (run.damage_mean) damage.push_back(*run.damage_mean);
        }
        s.coverage_mean = mean_of(coverage);
        s.coverage_sd = sample_sd(coverage, s.coverage_mean);
        if (!meta_fitness.empty()) {
            s.has_meta_fitness = true;
            s.meta_fitness_mean = mean_of(meta_fitness);
            s.meta_fitness_sd = sample_sd(meta_fitness, s.meta_fitness_mean);
        }
        if (!damage.empty()) {
            s.has_damage = true;
            s.damage_mean = mean_of(damage);
            s.damage_sd = sample_sd(damage, s.damage_mean);
        }
        summaries.push_back(s);

        nlohmann::json j;
        j["replicates"] = s.replicates;
        j["final_coverage"] = {{"mean", s.coverage_mean}, {"sd", s.coverage_sd}};
        if (s.has_meta_fitness)
            j["final_meta_fitness"] = {{"mean", s.meta_fitness_mean},
                                       {"sd", s.meta_fitness_sd}};
        if (s.has_damage)
            j["damage_test"] = {{"mean", s.damage_mean}, {"sd", s.damage_sd}};
        out_json["conditions"][condition] = j;
    }

    // pairwise effect sizes on per-damage percentages, as in the test protocol
    for (const auto& [cond_a, runs_a] : groups) {
        for (const auto& [cond_b, runs_b] : groups) {
            if (cond_a >= cond_b) continue;
            std::vector<double> a, b;
            for (const auto& run : runs_a)
                a.insert(a.end(), run.damage_rows.begin(), run.damage_rows.end());
            for (const auto& run : runs_b)
                b.insert(b.end(), run.damage_rows.begin(), run.damage_rows.end());
            if (a.empty() || b.empty()) continue;
            out_json["cliffs_delta"][cond_a + " vs " + cond_b] = cliffs_delta(a, b);
        }
    }

    write_json(dir / "summary.json", out_json);
    CsvWriter csv(dir / "summary.csv");
    csv.write_row({"condition", "replicates", "meta_fitness_mean", "meta_fitness_sd",
                   "coverage_mean", "coverage_sd", "damage_mean", "damage_sd"});
    for (const RunSummary& s : summaries) {
        csv.write_row({s.condition, std::to_string(s.replicates),
                       s.has_meta_fitness ? format_double(s.meta_fitness_mean) : "",
                       s.has_meta_fitness ? format_double(s.meta_fitness_sd) : "",
                       format_double(s.coverage_mean), format_double(s.coverage_sd),
                       s.has_damage ? format_double(s.damage_mean) : "",
                       s.has_damage ? format_double(s.damage_sd) : ""});
    }
    return summaries;
}

} // namespace qdmeta
