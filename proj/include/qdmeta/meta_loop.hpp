#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "qdmeta/archive.hpp"
#include "qdmeta/arm.hpp"
#include "qdmeta/cma_es.hpp"
#include "qdmeta/database.hpp"
#include "qdmeta/feature_map.hpp"
#include "qdmeta/param_control.hpp"
#include "qdmeta/rng.hpp"

namespace qdmeta {

inline constexpr double kDefaultGenerationsPerMetaGen = 5.0;
inline constexpr double kDefaultMutationRate = 0.125;
inline constexpr int kDefaultBatchSize = 400;
inline constexpr int kDefaultInitialPopulation = 2000;
inline constexpr int kTrainDamages = 16;

/// Training damages: per joint, one stuck angle drawn from U(-pi/2, 0) and
/// one from U(0, pi/2). Resampled every meta-generation.
inline std::vector<Damage> sample_train_damages(Rng& rng) {
    std::uniform_real_distribution<double> negative(-kJointLimit, 0.0);
    std::uniform_real_distribution<double> positive(0.0, kJointLimit);
    std::vector<Damage> damages;
    damages.reserve(kTrainDamages);
    for (int joint = 1; joint <= kNumJoints; ++joint) {
        damages.push_back(Damage::stuck(joint, negative(rng)));
        damages.push_back(Damage::stuck(joint, positive(rng)));
    }
    return damages;
}

/// Evaluates `population` random genotypes undamaged and stores the safe ones.
/// Every evaluation counts against the budget, unsafe included.
inline std::uint64_t seed_database(KBestDatabase& db, int population, Rng& rng) {
    for (int i = 0; i < population; ++i) {
        const Genotype g = random_genotype(rng);
        const Evaluation ev = evaluate(g);
        if (ev.safe) db.insert(SolutionRecord{g, ev.base_features, ev.fitness});
    }
    return static_cast<std::uint64_t>(population);
}

/// Seeds a standalone map the same way (plain MAP-Elites initialisation).
inline std::uint64_t seed_map(BehaviourMap& map, const BehaviourSpace& space, int population,
                              Rng& rng) {
    for (int i = 0; i < population; ++i) {
        const Genotype g = random_genotype(rng);
        const Evaluation ev = evaluate(g);
        if (ev.safe) map.try_insert(g, space.descriptor(ev.base_features), ev.fitness);
    }
    return static_cast<std::uint64_t>(population);
}

/// MAP-Elites generations: per generation, batch_size iterations of
/// sample -> mutate -> evaluate -> insert-if-safe. Safe children are also
/// handed to `db_sink`. An empty map falls back to random genotypes.
template <class Sink>
std::uint64_t map_elites_iterations(BehaviourMap& map, const BehaviourSpace& space,
                                    int generations, double mutation_rate, int batch_size,
                                    Sink&& db_sink, Rng& rng) {
    std::uint64_t evals = 0;
    for (int gen = 0; gen < generations; ++gen) {
        for (int i = 0; i < batch_size; ++i) {
            const Genotype parent =
                map.empty() ? random_genotype(rng) : map.sample_random(rng);
            const Genotype child = mutate(parent, mutation_rate, rng);
            const Evaluation ev = evaluate(child);
            ++evals;
            if (ev.safe) {
                map.try_insert(child, space.descriptor(ev.base_features), ev.fitness);
                db_sink(SolutionRecord{child, ev.base_features, ev.fitness});
            }
        }
    }
    return evals;
}

inline double sum_pairwise_distances(std::span<const Vec2> points) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            total += distance(points[i], points[j]);
    return total;
}

struct MetaFitnessResult {
    double value = 0.0;
    std::uint64_t evaluations = 0;
};

/// Samples 10% of the map's elites (round-half-up, at least one), evaluates
/// each under every damage, and averages the summed pairwise end-effector
/// distances across damages. Genotypes unsafe under a damage are excluded
/// from all pairs for that damage. Empty map yields 0.
inline MetaFitnessResult meta_fitness(const BehaviourMap& map,
                                      std::span<const Damage> damages, Rng& rng) {
    if (map.empty() || damages.empty()) return {0.0, 0};
    const int batch =
        std::max(1, static_cast<int>(std::floor(0.10 * map.coverage() + 0.5)));
    const std::vector<const Genotype*> sample = map.sample_without_replacement(batch, rng);

    MetaFitnessResult result;
    std::vector<Vec2> endpoints;
    for (const Damage& damage : damages) {
        endpoints.clear();
        for (const Genotype* g : sample) {
            const Evaluation ev = evaluate(*g, damage);
            ++result.evaluations;
            if (ev.safe) endpoints.push_back(ev.end_effector);
        }
        result.value += sum_pairwise_distances(endpoints);
    }
    result.value /= static_cast<double>(damages.size());
    return result;
}

inline double sample_sd(std::span<const double> values, double mean) {
    if (values.size() < 2) return 0.0;
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

inline double mean_of(std::span<const double> values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

/// Mean pairwise Euclidean distance among the evaluated meta-genotypes.
inline double meta_genotype_diversity(const std::vector<std::vector<double>>& candidates) {
    if (candidates.size() < 2) return 0.0;
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i + 1 < candidates.size(); ++i) {
        for (std::size_t j = i + 1; j < candidates.size(); ++j) {
            double sq = 0.0;
            for (std::size_t d = 0; d < candidates[i].size(); ++d) {
                const double diff = candidates[i][d] - candidates[j][d];
                sq += diff * diff;
            }
            total += std::sqrt(sq);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

/// Orchestrates the meta-evolution run: database seeding, per-meta-generation
/// map construction, MAP-Elites iterations with controlled parameters,
/// meta-fitness evaluation on freshly sampled training damages, CMA-ES and
/// controller updates.
class MetaEvolution {
public:
    struct Params {
        FeatureMapKind kind = FeatureMapKind::Linear;
        ControlSpec control;
        std::uint64_t budget = 200000;
        int batch_size = kDefaultBatchSize;
        int initial_population = kDefaultInitialPopulation;
        int lambda = 5;
        std::uint64_t seed = 1;
        KBestDatabase::Config db;
        RlConfig rl;
    };

    struct GenerationRow {
        int meta_generation = 0;
        std::uint64_t evaluations = 0;
        double coverage_mean = 0.0, coverage_sd = 0.0;
        double global_fitness_mean = 0.0, global_fitness_sd = 0.0;
        double average_fitness_mean = 0.0, average_fitness_sd = 0.0;
        double meta_fitness_mean = 0.0, meta_fitness_sd = 0.0, meta_fitness_max = 0.0;
        double generations_value = 0.0;
        double mutation_rate_value = 0.0;
        double sigma = 0.0;
    };

    struct RlLogRow {
        int meta_generation = 0;
        Observation observation;
        double reward = 0.0;
        int action = 0;
        double value = 0.0;
        int leaf = 0;
    };

    explicit MetaEvolution(Params params)
        : params_(std::move(params)),
          db_(params_.db),
          cma_(meta_genotype_length(params_.kind, params_.control.endogenous()),
               meta_box(params_.kind), params_.lambda),
          rng_(make_rng(derive_seed(params_.seed, 0xA11CE))) {
        if (params_.budget < static_cast<std::uint64_t>(params_.initial_population))
            throw std::invalid_argument("MetaEvolution: budget below initial population");
        if (params_.control.strategy == ControlSpec::Strategy::Rl)
            rl_.emplace(params_.control.which, params_.rl);
        evaluations_ += seed_database(db_, params_.initial_population, rng_);
    }

    bool done() const { return evaluations_ >= params_.budget; }
    std::uint64_t evaluations_used() const { return evaluations_; }
    const KBestDatabase& database() const { return db_; }
    const CmaEs& cma() const { return cma_; }
    const std::vector<RlLogRow>& rl_log() const { return rl_log_; }
    const Params& params() const { return params_; }

    GenerationRow step() {
        const int t = generation_;
        const std::uint64_t evals_at_start = evaluations_;

        // controlled parameter values for this meta-generation
        double generations_value = kDefaultGenerationsPerMetaGen;
        double mutation_rate_value = kDefaultMutationRate;
        resolve_control(t, generations_value, mutation_rate_value);

        const std::vector<Damage> damages = sample_train_damages(rng_);
        const std::vector<std::vector<double>> candidates = cma_.ask(rng_);

        std::vector<double> meta_fitnesses(params_.lambda, 0.0);
        std::vector<double> coverages, globals, averages;
        std::vector<std::vector<SolutionRecord>> buffers(params_.lambda);

        for (int i = 0; i < params_.lambda; ++i) {
            double gens_i = generations_value;
            double rate_i = mutation_rate_value;
            std::vector<double> genes = candidates[i];
            if (params_.control.endogenous()) {
                auto [value, stripped] = endogenous_decode(
                    genes, params_.control.which, meta_box(params_.kind), params_.kind);
                genes = std::move(stripped);
                if (params_.control.which == ControlledParamKind::GenerationsPerMetaGen)
                    gens_i = value;
                else
                    rate_i = value;
                endogenous_values_[i] = value;
            }
            const BehaviourSpace space =
                feature_map_space(decode(std::move(genes), params_.kind));

            Rng worker = make_rng(derive_seed(params_.seed, t + 1, i));
            BehaviourMap map = db_.build_map(space);
            evaluations_ += map_elites_iterations(
                map, space, consume_generations(gens_i), rate_i, params_.batch_size,
                [&](const SolutionRecord& rec) { buffers[i].push_back(rec); }, worker);

            const MetaFitnessResult mf = meta_fitness(map, damages, worker);
            evaluations_ += mf.evaluations;
            meta_fitnesses[i] = mf.value;

            coverages.push_back(map.coverage());
            if (!map.empty()) {
                const BehaviourMap::Metrics m = map.metrics();
                globals.push_back(m.global_fitness);
                averages.push_back(m.average_fitness);
            } else {
                globals.push_back(0.0);
                averages.push_back(0.0);
            }
        }

        // database insert buffers merge in meta-individual order
        for (const auto& buffer : buffers)
            for (const SolutionRecord& rec : buffer) db_.insert(rec);

        cma_.tell(meta_fitnesses);

        // controller feedback
        const double max_mf = *std::max_element(meta_fitnesses.begin(), meta_fitnesses.end());
        const double mean_mf = mean_of(meta_fitnesses);
        const std::uint64_t evals_this_gen = evaluations_ - evals_at_start;
        double reward = 0.0;
        if (t > 0)
            reward = (max_mf - last_max_mf_) /
                     std::max<std::uint64_t>(1, evals_this_gen) * kRewardScale;
        if (t == 0 || max_mf > best_max_mf_) {
            best_max_mf_ = max_mf;
            stagnation_ = 0;
        } else {
            ++stagnation_;
        }
        last_observation_ = Observation{max_mf,
                                        mean_mf,
                                        sample_sd(meta_fitnesses, mean_mf),
                                        meta_genotype_diversity(candidates),
                                        stagnation_,
                                        reward};
        last_reward_ = reward;
        last_max_mf_ = max_mf;

        GenerationRow row;
        row.meta_generation = t;
        row.evaluations = evaluations_;
        row.coverage_mean = mean_of(coverages);
        row.coverage_sd = sample_sd(coverages, row.coverage_mean);
        row.global_fitness_mean = mean_of(globals);
        row.global_fitness_sd = sample_sd(globals, row.global_fitness_mean);
        row.average_fitness_mean = mean_of(averages);
        row.average_fitness_sd = sample_sd(averages, row.average_fitness_mean);
        row.meta_fitness_mean = mean_mf;
        row.meta_fitness_sd = sample_sd(meta_fitnesses, mean_mf);
        row.meta_fitness_max = max_mf;
        row.generations_value = params_.control.endogenous() &&
                                        params_.control.which ==
                                            ControlledParamKind::GenerationsPerMetaGen
                                    ? mean_of(endogenous_values_)
                                    : generations_value;
        row.mutation_rate_value = params_.control.endogenous() &&
                                          params_.control.which ==
                                              ControlledParamKind::MutationRate
                                      ? mean_of(endogenous_values_)
                                      : mutation_rate_value;
        row.sigma = cma_.sigma();

        ++generation_;
        return row;
    }

    /// Map built from the current mean meta-genotype (clamped into the box),
    /// populated from the database.
    BehaviourMap mean_map() const {
        std::vector<double> genes = cma_.mean_std();
        const Box box = meta_box(params_.kind);
        for (double& g : genes) g = box.clamp(g);
        if (params_.control.endogenous()) genes.pop_back();
        return db_.build_map(feature_map_space(decode(std::move(genes), params_.kind)));
    }

private:
    void resolve_control(int t, double& generations_value, double& mutation_rate_value) {
        using Strategy = ControlSpec::Strategy;
        double* slot = params_.control.which == ControlledParamKind::GenerationsPerMetaGen
                           ? &generations_value
                           : &mutation_rate_value;
        switch (params_.control.strategy) {
        case Strategy::None:
            break;
        case Strategy::Static:
            *slot = static_value(params_.control.which, params_.control.static_setting);
            break;
        case Strategy::Anneal:
            *slot = anneal_value(params_.control.which, evaluations_, params_.budget);
            break;
        case Strategy::Endogenous:
            endogenous_values_.assign(params_.lambda, 0.0);
            break; // resolved per meta-individual
        case Strategy::Rl: {
            const RlController::StepResult res =
                rl_->step(last_observation_, last_reward_, rng_);
            *slot = res.value;
            rl_log_.push_back(
                {t, last_observation_, last_reward_, res.action, res.value, res.leaf});
            break;
        }
        }
    }

    Params params_;
    KBestDatabase db_;
    CmaEs cma_;
    Rng rng_;
    std::optional<RlController> rl_;

    std::uint64_t evaluations_ = 0;
    int generation_ = 0;
    double last_max_mf_ = 0.0;
    double best_max_mf_ = 0.0;
    int stagnation_ = 0;
    double last_reward_ = 0.0;
    Observation last_observation_;
    std::vector<double> endogenous_values_;
    std::vector<RlLogRow> rl_log_;
};

} // namespace qdmeta
