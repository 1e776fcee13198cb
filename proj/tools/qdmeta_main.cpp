#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qdmeta/runner.hpp"
#include "qdmeta/version.hpp"

namespace {

qdmeta::TargetGrid parse_grid(const std::string& text) {
    const std::size_t x = text.find('x');
    if (x == std::string::npos)
        throw qdmeta::UsageError("bad grid spec (want RxA, e.g. 20x36): " + text);
    try {
        return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
    } catch (const std::exception&) {
        throw qdmeta::UsageError("bad grid spec: " + text);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qdmeta: quality-diversity meta-evolution on a planar 8-joint arm"};
    app.set_version_flag("--version", qdmeta::kVersion);
    app.require_subcommand(1);

    // evolve
    qdmeta::RunConfig config;
    std::string config_file;
    std::string out_flag = "run";
    CLI::App* evolve = app.add_subcommand("evolve", "run one experimental condition");
    evolve->add_option("--condition", config.condition,
                       "position|polar|jointpairangle|anglesum|random-<fm>|meta-<fm> "
                       "with <fm> in linear|selection|nonlinear");
    evolve->add_option("--control", config.control,
                       "meta conditions: static-gen:<v>|static-mr:<v>|anneal-gen|"
                       "anneal-mr|endo-gen|endo-mr|rl-gen|rl-mr");
    evolve->add_option("--budget", config.budget, "bottom-level evaluation budget");
    evolve->add_option("--seed", config.seed, "rng seed");
    evolve->add_option("--out", out_flag, "output directory");
    evolve->add_option("--batch-size", config.batch_size, "individuals per generation");
    evolve->add_option("--init-pop", config.initial_population, "initial random population");
    evolve->add_option("--lambda", config.lambda, "meta-population size");
    evolve->add_option("--config", config_file, "key=value or JSON file overriding flags");

    // test
    std::string archive_file;
    double tolerance = qdmeta::kDefaultTestTolerance;
    std::string grid_spec = "20x36";
    std::string test_out;
    CLI::App* test = app.add_subcommand("test", "damage-recovery test over an archive");
    test->add_option("--archive", archive_file, "archive JSONL file")->required();
    test->add_option("--tolerance", tolerance, "reach tolerance in metres");
    test->add_option("--grid", grid_spec, "polar target grid RxA");
    test->add_option("--out", test_out, "output directory (default: archive's)");

    // summarise
    std::string summary_dir;
    CLI::App* summarise = app.add_subcommand("summarise", "aggregate runs in a directory");
    summarise->add_option("--dir", summary_dir, "directory holding run outputs")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (evolve->parsed()) {
            config.out_dir = out_flag;
            if (!config_file.empty()) qdmeta::apply_config_file(config, config_file);
            qdmeta::run_evolve(config);
            std::printf("run complete: %s\n", config.out_dir.string().c_str());
        } else if (test->parsed()) {
            std::optional<std::filesystem::path> out;
            if (!test_out.empty()) out = test_out;
            const qdmeta::DamageTestResult result = qdmeta::run_damage_test_files(
                archive_file, tolerance, parse_grid(grid_spec), out);
            std::printf("targets reached: %.2f%% +- %.2f%% over %zu damages\n",
                        result.mean, result.sd, result.rows.size());
        } else if (summarise->parsed()) {
            const auto summaries = qdmeta::export_summary(summary_dir);
            for (const qdmeta::RunSummary& s : summaries) {
                std::printf("%-32s n=%d coverage %.1f +- %.1f", s.condition.c_str(),
                            s.replicates, s.coverage_mean, s.coverage_sd);
                if (s.has_meta_fitness)
                    std::printf("  meta-fitness %.4g +- %.4g", s.meta_fitness_mean,
                                s.meta_fitness_sd);
                if (s.has_damage)
                    std::printf("  damage %.2f%% +- %.2f%%", s.damage_mean, s.damage_sd);
                std::printf("\n");
            }
        }
    } catch (const qdmeta::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
