#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "qdmeta/archive.hpp"
#include "qdmeta/arm.hpp"
#include "qdmeta/feature_map.hpp"

namespace qdmeta {

struct SolutionRecord {
    Genotype genotype;
    BaseFeatures base_features;
    double fitness = 0.0;
};

enum class DbInsertOutcome { Added, ReplacedSimilar, RejectedLowerFitness, EvictedWorst };

struct DatabaseConfig {
    double delta = 1.0 / 3.0;
    int initial_k = 5000;
    std::size_t capacity = 4782969; // 3^14
};

/// Store of all safe solutions ever evaluated: the base-behavioural space
/// [0,1]^14 is split into coarse bins of width delta, each keeping at most k
/// records; within a bin, records competing for the same fine hypercube of
/// width delta/k are resolved by fitness. When the total capacity is hit, k
/// is decremented and over-full bins drop their worst record.
class KBestDatabase {
public:
    using Config = DatabaseConfig;
    using CoarseKey = std::array<std::uint8_t, kNumBaseFeatures>;
    using FineKey = std::array<std::int32_t, kNumBaseFeatures>;

    explicit KBestDatabase(Config config = Config{})
        : config_(config), k_(config.initial_k) {
        if (config_.delta <= 0.0 || config_.delta > 1.0)
            throw std::invalid_argument("KBestDatabase: delta outside (0,1]");
        if (config_.initial_k < 1)
            throw std::invalid_argument("KBestDatabase: initial k must be >= 1");
        coarse_bins_ = static_cast<int>(std::round(1.0 / config_.delta));
    }

    static CoarseKey coarse_index(const BaseFeatures& b, double delta = 1.0 / 3.0) {
        const int nbins = static_cast<int>(std::round(1.0 / delta));
        CoarseKey key;
        for (int j = 0; j < kNumBaseFeatures; ++j) {
            if (!(b[j] >= 0.0 && b[j] <= 1.0))
                throw std::invalid_argument("coarse_index: base-feature outside [0,1]");
            key[j] = static_cast<std::uint8_t>(
                std::min(static_cast<int>(std::floor(b[j] / delta)), nbins - 1));
        }
        return key;
    }

    int k() const { return k_; }
    double delta() const { return config_.delta; }
    std::size_t capacity() const { return config_.capacity; }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    DbInsertOutcome insert(const SolutionRecord& record) {
        const CoarseKey coarse = coarse_index(record.base_features, config_.delta);
        Bin& bin = bins_[coarse];

        const FineKey fine = fine_index(record.base_features, coarse);
        if (auto it = bin.fine.find(fine); it != bin.fine.end()) {
            Entry& resident = bin.entries[it->second];
            if (record.fitness > resident.record.fitness) {
                resident.record = record;
                return DbInsertOutcome::ReplacedSimilar;
            }
            return DbInsertOutcome::RejectedLowerFitness;
        }

        while (size_ >= config_.capacity) {
            if (k_ <= 1)
                throw std::runtime_error(
                    "KBestDatabase: capacity exceeded and k cannot shrink below 1");
            shrink();
        }

        // fine indices depend on k; relocate in case shrink changed it
        Bin& target = bins_[coarse];
        const FineKey fine_now = fine_index(record.base_features, coarse);
        if (auto it = target.fine.find(fine_now); it != target.fine.end()) {
            Entry& resident = target.entries[it->second];
            if (record.fitness > resident.record.fitness) {
                resident.record = record;
                return DbInsertOutcome::ReplacedSimilar;
            }
            return DbInsertOutcome::RejectedLowerFitness;
        }

        target.fine.emplace(fine_now, target.entries.size());
        target.entries.push_back(Entry{record, next_seq_++});
        ++size_;

        if (static_cast<int>(target.entries.size()) == k_ + 1) {
            evict_worst(target, coarse);
            return DbInsertOutcome::EvictedWorst;
        }
        return DbInsertOutcome::Added;
    }

    /// Decrements k; every bin holding more than the new k records loses its
    /// single lowest-fitness record. Returns the new k.
    int shrink() {
        if (k_ < 2)
            throw std::runtime_error("shrink: k must be >= 2");
        --k_;
        for (auto& [coarse, bin] : bins_) {
            if (static_cast<int>(bin.entries.size()) > k_) evict_worst(bin, coarse);
        }
        // fine-cube width delta/k changed for every record
        for (auto& [coarse, bin] : bins_) rebuild_fine(bin, coarse);
        return k_;
    }

    /// Fresh map populated from every record in deterministic order (sorted
    /// coarse index, then insertion order).
    BehaviourMap build_map(const BehaviourSpace& space) const {
        BehaviourMap map = space.make_map();
        for_each_record([&](const SolutionRecord& rec) {
            map.try_insert(rec.genotype, space.descriptor(rec.base_features), rec.fitness);
        });
        return map;
    }

    template <class Fn> void for_each_record(Fn&& fn) const {
        std::vector<const Entry*> order;
        for (const auto& [coarse, bin] : bins_) {
            order.clear();
            order.reserve(bin.entries.size());
            for (const Entry& e : bin.entries) order.push_back(&e);
            std::sort(order.begin(), order.end(),
                      [](const Entry* a, const Entry* b) { return a->seq < b->seq; });
            for (const Entry* e : order) fn(e->record);
        }
    }

private:
    struct Entry {
        SolutionRecord record;
        std::uint64_t seq = 0; // global insertion counter, fixes export order
    };

    struct FineKeyHash {
        std::size_t operator()(const FineKey& key) const {
            std::uint64_t h = 1469598103934665603ULL;
            for (std::int32_t v : key) {
                h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
                h *= 1099511628211ULL;
            }
            return static_cast<std::size_t>(h);
        }
    };

    struct Bin {
        std::vector<Entry> entries;
        std::unordered_map<FineKey, std::size_t, FineKeyHash> fine;
    };

    FineKey fine_index(const BaseFeatures& b, const CoarseKey& coarse) const {
        FineKey key;
        const double width = config_.delta / k_;
        for (int j = 0; j < kNumBaseFeatures; ++j) {
            const double offset = b[j] - coarse[j] * config_.delta;
            key[j] = static_cast<std::int32_t>(
                std::clamp(static_cast<int>(std::floor(offset / width)), 0, k_ - 1));
        }
        return key;
    }

    // Removes the bin's minimum-fitness record (oldest wins ties).
    void evict_worst(Bin& bin, const CoarseKey& coarse) {
        std::size_t worst = 0;
        for (std::size_t i = 1; i < bin.entries.size(); ++i) {
            const Entry& e = bin.entries[i];
            const Entry& w = bin.entries[worst];
            if (e.record.fitness < w.record.fitness ||
                (e.record.fitness == w.record.fitness && e.seq < w.seq))
                worst = i;
        }
        bin.fine.erase(fine_index(bin.entries[worst].record.base_features, coarse));
        if (worst != bin.entries.size() - 1) {
            bin.entries[worst] = std::move(bin.entries.back());
            bin.fine[fine_index(bin.entries[worst].record.base_features, coarse)] = worst;
        }
        bin.entries.pop_back();
        --size_;
    }

    void rebuild_fine(Bin& bin, const CoarseKey& coarse) {
        bin.fine.clear();
        for (std::size_t i = 0; i < bin.entries.size(); ++i)
            bin.fine.emplace(fine_index(bin.entries[i].record.base_features, coarse), i);
    }

    Config config_;
    int k_;
    int coarse_bins_;
    std::size_t size_ = 0;
    std::uint64_t next_seq_ = 0;
    std::map<CoarseKey, Bin> bins_; // ordered: deterministic iteration
};

} // namespace qdmeta
