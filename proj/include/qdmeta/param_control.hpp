#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdmeta/feature_map.hpp" // Box
#include "qdmeta/rng.hpp"

namespace qdmeta {

enum class ControlledParamKind { GenerationsPerMetaGen, MutationRate };

struct ParamRange {
    double lo = 0.0;
    double hi = 1.0;
};

inline ParamRange param_range(ControlledParamKind which) {
    switch (which) {
    case ControlledParamKind::GenerationsPerMetaGen: return {1.0, 50.0};
    case ControlledParamKind::MutationRate: return {0.001, 1.0};
    }
    throw std::logic_error("param_range: unreachable");
}

/// Constant setting for the whole run; out-of-range values are a
/// configuration error.
inline double static_value(ControlledParamKind which, double setting) {
    const ParamRange r = param_range(which);
    if (setting < r.lo || setting > r.hi)
        throw std::invalid_argument("static parameter setting outside its range");
    return setting;
}

/// P(E) = m_P + (M_P - m_P) * (M_E - E) / M_E, clamped to m_P past the budget.
inline double anneal_value(ControlledParamKind which, std::uint64_t evaluations,
                           std::uint64_t budget) {
    const ParamRange r = param_range(which);
    if (evaluations >= budget) return r.lo;
    const double remaining =
        static_cast<double>(budget - evaluations) / static_cast<double>(budget);
    return r.lo + (r.hi - r.lo) * remaining;
}

/// Splits the trailing control gene off a meta-genotype and maps it affinely
/// from its box onto the parameter range.
inline std::pair<double, std::vector<double>>
endogenous_decode(const std::vector<double>& w, ControlledParamKind which, Box box,
                  FeatureMapKind kind) {
    if (static_cast<int>(w.size()) != meta_genotype_length(kind) + 1)
        throw std::invalid_argument("endogenous_decode: missing control gene");
    const double u = std::clamp((w.back() - box.lo) / box.width(), 0.0, 1.0);
    const ParamRange r = param_range(which);
    std::vector<double> stripped(w.begin(), w.end() - 1);
    return {r.lo + (r.hi - r.lo) * u, std::move(stripped)};
}

/// Generations values are real-valued internally; consumed round-half-up.
inline int consume_generations(double value) {
    return std::max(1, static_cast<int>(std::floor(value + 0.5)));
}

// ---------------------------------------------------------------------------
// SARSA controller over a U-tree discretisation of the observation space.

inline constexpr int kRlActions = 5;
inline constexpr int kObservationDims = 6;
inline constexpr double kRewardScale = 1e4; // keeps Q-values O(1)

struct Observation {
    double max_mf = 0.0;
    double mean_mf = 0.0;
    double std_mf = 0.0;
    double diversity = 0.0; // mean pairwise distance among sampled meta-genotypes
    int stagnation = 0;     // meta-generations without max-meta-fitness improvement
    double last_reward = 0.0;

    std::array<double, kObservationDims> as_array() const {
        return {max_mf, mean_mf, std_mf, diversity, static_cast<double>(stagnation),
                last_reward};
    }
};

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double stat = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        stat = std::max(stat, std::abs(static_cast<double>(i) / a.size() -
                                       static_cast<double>(j) / b.size()));
    }
    return stat;
}

struct RlConfig {
    double alpha = 0.1;      // learning rate
    double gamma = 0.8;      // discount
    double epsilon = 0.1;    // exploration rate
    int split_threshold = 20;
    double ks_threshold = 0.4;
};

/// SARSA over 5 actions (equal bins of the parameter range), with states from
/// a U-tree that splits on the observation dimension whose median threshold
/// maximises the KS statistic between the one-step returns of the two sides.
class RlController {
public:
    struct StepResult {
        int action = 0;
        double value = 0.0;
        int leaf = 0;
    };

    explicit RlController(ControlledParamKind which, RlConfig config = {})
        : which_(which), config_(config) {
        nodes_.push_back(Node{});
    }

    ControlledParamKind which() const { return which_; }
    const RlConfig& config() const { return config_; }

    int num_leaves() const {
        int count = 0;
        for (const Node& node : nodes_)
            if (node.is_leaf()) ++count;
        return count;
    }

    int find_leaf(const Observation& obs) const {
        const auto x = obs.as_array();
        int id = 0;
        while (!nodes_[id].is_leaf())
            id = x[nodes_[id].split_dim] <= nodes_[id].threshold ? nodes_[id].left
                                                                 : nodes_[id].right;
        return id;
    }

    const std::array<double, kRlActions>& leaf_q(int leaf) const { return nodes_[leaf].q; }

    double bin_centre(int action) const {
        const ParamRange r = param_range(which_);
        return r.lo + (r.hi - r.lo) * (action + 0.5) / kRlActions;
    }

    /// One SARSA step: update Q for the previous (state, action) with the new
    /// observation's leaf, pick the next action epsilon-greedily (ties to the
    /// lowest index), and return the centre of its parameter bin.
    StepResult step(const Observation& obs, double reward, Rng& rng) {
        const int leaf = find_leaf(obs);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        int action;
        if (coin(rng) < config_.epsilon) {
            std::uniform_int_distribution<int> pick(0, kRlActions - 1);
            action = pick(rng);
        } else {
            action = greedy_action(nodes_[leaf].q);
        }

        if (last_) {
            const int prev_leaf = find_leaf(last_->obs);
            const double target = reward + config_.gamma * nodes_[leaf].q[action];
            double& q = nodes_[prev_leaf].q[last_->action];
            q += config_.alpha * (target - q);
            nodes_[prev_leaf].buffer.push_back({last_->obs.as_array(), target});
            try_refine_leaf(prev_leaf);
        }

        last_ = LastStep{obs, action};
        return {action, bin_centre(action), leaf};
    }

    /// Attempts the KS-test split on one leaf's transition buffer. Returns
    /// whether a split happened. Children inherit Q-values and partition the
    /// buffer; no split ever produces an empty leaf.
    bool try_refine_leaf(int leaf) {
        Node& node = nodes_[leaf];
        if (!node.is_leaf() ||
            static_cast<int>(node.buffer.size()) < config_.split_threshold)
            return false;

        int best_dim = -1;
        double best_threshold = 0.0;
        double best_stat = 0.0;
        for (int d = 0; d < kObservationDims; ++d) {
            std::vector<double> values;
            values.reserve(node.buffer.size());
            for (const auto& t : node.buffer) values.push_back(t.obs[d]);
            std::sort(values.begin(), values.end());
            const double threshold = values[(values.size() - 1) / 2];

            std::vector<double> left, right;
            for (const auto& t : node.buffer)
                (t.obs[d] <= threshold ? left : right).push_back(t.ret);
            if (left.empty() || right.empty()) continue;

            const double stat = ks_statistic(left, right);
            if (stat > best_stat) {
                best_stat = stat;
                best_dim = d;
                best_threshold = threshold;
            }
        }
        if (best_dim < 0 || best_stat < config_.ks_threshold) return false;

        Node left_child, right_child;
        left_child.q = node.q;
        right_child.q = node.q;
        for (const auto& t : node.buffer)
            (t.obs[best_dim] <= best_threshold ? left_child : right_child)
                .buffer.push_back(t);

        node.split_dim = best_dim;
        node.threshold = best_threshold;
        node.buffer.clear();
        node.left = static_cast<int>(nodes_.size());
        node.right = static_cast<int>(nodes_.size()) + 1;
        nodes_.push_back(std::move(left_child));
        nodes_.push_back(std::move(right_child));
        return true;
    }

    /// Test hook: inject a transition into the leaf containing obs.
    void buffer_transition(const Observation& obs, double one_step_return) {
        nodes_[find_leaf(obs)].buffer.push_back({obs.as_array(), one_step_return});
    }

    int buffered(int leaf) const { return static_cast<int>(nodes_[leaf].buffer.size()); }

private:
    struct Transition {
        std::array<double, kObservationDims> obs;
        double ret = 0.0;
    };

    struct Node {
        int split_dim = -1; // leaf when < 0
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        std::array<double, kRlActions> q{};
        std::vector<Transition> buffer;

        bool is_leaf() const { return split_dim < 0; }
    };

    struct LastStep {
        Observation obs;
        int action = 0;
    };

    static int greedy_action(const std::array<double, kRlActions>& q) {
        int best = 0;
        for (int a = 1; a < kRlActions; ++a)
            if (q[a] > q[best]) best = a;
        return best;
    }

    ControlledParamKind which_;
    RlConfig config_;
    std::vector<Node> nodes_;
    std::optional<LastStep> last_;
};

// ---------------------------------------------------------------------------
// Which strategy drives which parameter in a run.

struct ControlSpec {
    enum class Strategy { None, Static, Anneal, Endogenous, Rl };

    Strategy strategy = Strategy::None;
    ControlledParamKind which = ControlledParamKind::GenerationsPerMetaGen;
    double static_setting = 0.0;

    bool endogenous() const { return strategy == Strategy::Endogenous; }
};

} // namespace qdmeta
