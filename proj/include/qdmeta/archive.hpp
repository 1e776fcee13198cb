#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "qdmeta/arm.hpp"
#include "qdmeta/rng.hpp"

namespace qdmeta {

inline constexpr int kMaxMapCells = 4096;

enum class InsertOutcome { InsertedEmpty, ReplacedWorse, Rejected };

struct Elite {
    Genotype genotype;
    std::vector<double> descriptor; // in [0,1]^D
    double fitness = 0.0;
};

/// Component-wise floor(d_j * bins_per_dim), with 1.0 clamped to the last bin.
/// Out-of-range components are a contract violation.
inline std::vector<int> bin_index(std::span<const double> descriptor, int bins_per_dim) {
    std::vector<int> idx(descriptor.size());
    for (std::size_t j = 0; j < descriptor.size(); ++j) {
        const double d = descriptor[j];
        if (!(d >= 0.0 && d <= 1.0))
            throw std::invalid_argument("bin_index: descriptor component outside [0,1]");
        idx[j] = std::min(static_cast<int>(std::floor(d * bins_per_dim)), bins_per_dim - 1);
    }
    return idx;
}

/// Grid archive of elites: equally-sized hypercubes over [0,1]^dims, at most
/// one elite per cell, replacement on strictly higher fitness.
class BehaviourMap {
public:
    BehaviourMap(int dims, int bins_per_dim) : dims_(dims), bins_(bins_per_dim) {
        if (dims < 1 || bins_per_dim < 1)
            throw std::invalid_argument("BehaviourMap: dims and bins_per_dim must be positive");
        std::int64_t cells = 1;
        for (int i = 0; i < dims; ++i) cells *= bins_per_dim;
        if (cells > kMaxMapCells)
            throw std::invalid_argument("BehaviourMap: capacity exceeds 4096 cells");
    }

    int dims() const { return dims_; }
    int bins_per_dim() const { return bins_; }
    int coverage() const { return static_cast<int>(cells_.size()); }
    bool empty() const { return cells_.empty(); }

    std::int64_t flat_index(std::span<const int> idx) const {
        std::int64_t flat = 0;
        for (int j = dims_ - 1; j >= 0; --j) flat = flat * bins_ + idx[j];
        return flat;
    }

    /// Inserts iff the cell is empty or fitness is strictly greater than the
    /// incumbent's; equal fitness keeps the incumbent. Descriptor components
    /// are clamped to [0,1] before binning.
    InsertOutcome try_insert(const Genotype& genotype, std::vector<double> descriptor,
                             double fitness_value) {
        if (static_cast<int>(descriptor.size()) != dims_)
            throw std::invalid_argument("try_insert: descriptor dimensionality mismatch");
        for (double& d : descriptor) d = std::clamp(d, 0.0, 1.0);
        const std::int64_t key = flat_index(bin_index(descriptor, bins_));

        auto it = cells_.find(key);
        if (it == cells_.end()) {
            cells_.emplace(key, Elite{genotype, std::move(descriptor), fitness_value});
            occupied_.push_back(key);
            return InsertOutcome::InsertedEmpty;
        }
        if (fitness_value > it->second.fitness) {
            it->second = Elite{genotype, std::move(descriptor), fitness_value};
            return InsertOutcome::ReplacedWorse;
        }
        return InsertOutcome::Rejected;
    }

    /// Uniform choice over non-empty cells.
    const Genotype& sample_random(Rng& rng) const {
        if (occupied_.empty())
            throw std::runtime_error("sample_random: empty map, caller must seed first");
        std::uniform_int_distribution<std::size_t> pick(0, occupied_.size() - 1);
        return cells_.at(occupied_[pick(rng)]).genotype;
    }

    const Elite* cell(std::span<const int> idx) const {
        auto it = cells_.find(flat_index(idx));
        return it == cells_.end() ? nullptr : &it->second;
    }

    /// Uniform sample of n distinct elites' genotypes (n capped at coverage).
    std::vector<const Genotype*> sample_without_replacement(int n, Rng& rng) const {
        std::vector<std::int64_t> keys = occupied_;
        const int take = std::min<int>(n, static_cast<int>(keys.size()));
        std::vector<const Genotype*> out;
        out.reserve(take);
        for (int i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, keys.size() - 1);
            std::swap(keys[i], keys[pick(rng)]);
            out.push_back(&cells_.at(keys[i]).genotype);
        }
        return out;
    }

    struct Metrics {
        int coverage = 0;
        double global_fitness = 0.0;
        double average_fitness = 0.0;
    };

    /// Throws for an empty map: global/average fitness are undefined there.
    Metrics metrics() const {
        if (cells_.empty())
            throw std::runtime_error("metrics: global/average fitness undefined for empty map");
        Metrics m;
        m.coverage = coverage();
        double best = -std::numeric_limits<double>::infinity();
        double sum = 0.0;
        for (const auto& [key, elite] : cells_) {
            best = std::max(best, elite.fitness);
            sum += elite.fitness;
        }
        m.global_fitness = best;
        m.average_fitness = sum / static_cast<double>(cells_.size());
        return m;
    }

    /// Elites with their flat cell index, sorted by index (stable export order).
    std::vector<std::pair<std::int64_t, const Elite*>> sorted_elites() const {
        std::vector<std::pair<std::int64_t, const Elite*>> out;
        out.reserve(cells_.size());
        for (const auto& [key, elite] : cells_) out.emplace_back(key, &elite);
        std::sort(out.begin(), out.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        return out;
    }

    template <class Fn> void for_each_elite(Fn&& fn) const {
        for (const auto& [key, elite] : cells_) fn(elite);
    }

private:
    int dims_;
    int bins_;
    std::unordered_map<std::int64_t, Elite> cells_;
    std::vector<std::int64_t> occupied_; // append-only; cells never vacate
};

/// Per gene with probability `rate`, one grid step up or down (equiprobable),
/// clamped to [0,1]. The result stays on the 0.025 grid.
inline Genotype mutate(const Genotype& genotype, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0)
        throw std::invalid_argument("mutate: rate outside [0,1]");
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    Genotype child = genotype;
    for (double& g : child) {
        if (coin(rng) < rate) {
            const int level = static_cast<int>(std::round(g / kGeneStep));
            const int step = coin(rng) < 0.5 ? -1 : 1;
            g = std::clamp(level + step, 0, kGeneLevels - 1) * kGeneStep;
        }
    }
    return child;
}

/// Bins per dimension giving at most 4096 cells: 64 for 2-D, 8 for 4-D, 4 for 6-D.
inline int default_bins_per_dim(int dims) {
    switch (dims) {
    case 2: return 64;
    case 4: return 8;
    case 6: return 4;
    default: return std::max(1, static_cast<int>(std::floor(std::pow(4096.0, 1.0 / dims))));
    }
}

} // namespace qdmeta
