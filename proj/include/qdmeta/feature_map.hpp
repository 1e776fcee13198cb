#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdmeta/archive.hpp"
#include "qdmeta/arm.hpp"

namespace qdmeta {

inline constexpr int kTargetFeatures = 4; // D
inline constexpr int kHiddenUnits = 10;   // N_h
inline constexpr double kSigmoidScale = 30.0;
inline constexpr double kNormaliseLow = 0.20;
inline constexpr double kNormaliseHigh = 0.80;

enum class FeatureMapKind { Linear, Selection, NonLinear };

inline const char* to_string(FeatureMapKind kind) {
    switch (kind) {
    case FeatureMapKind::Linear: return "linear";
    case FeatureMapKind::Selection: return "selection";
    case FeatureMapKind::NonLinear: return "nonlinear";
    }
    return "?";
}

inline FeatureMapKind feature_map_kind_from_string(const std::string& s) {
    if (s == "linear") return FeatureMapKind::Linear;
    if (s == "selection") return FeatureMapKind::Selection;
    if (s == "nonlinear") return FeatureMapKind::NonLinear;
    throw std::invalid_argument("unknown feature-map kind: " + s);
}

struct Box {
    double lo = 0.0;
    double hi = 1.0;
    double width() const { return hi - lo; }
    double midpoint() const { return 0.5 * (lo + hi); }
    double clamp(double v) const { return std::clamp(v, lo, hi); }
};

inline Box meta_box(FeatureMapKind kind) {
    return kind == FeatureMapKind::NonLinear ? Box{-1.0, 1.0} : Box{0.0, 1.0};
}

/// 56 genes for linear/selection (D x N_b), 182 for non-linear
/// (N_b*N_h + N_h*D + 2); +1 when an endogenous control gene is appended.
inline int meta_genotype_length(FeatureMapKind kind, bool endogenous = false) {
    int n = kind == FeatureMapKind::NonLinear
                ? kNumBaseFeatures * kHiddenUnits + kHiddenUnits * kTargetFeatures + 2
                : kTargetFeatures * kNumBaseFeatures;
    return n + (endogenous ? 1 : 0);
}

/// Decoded feature-map parameters. Genes stay flat so that decode/flatten is
/// the identity; accessors expose the documented layout:
///   linear/selection: W row-major, row = target feature (D x N_b);
///   non-linear: W1 row-major (N_h x N_b), W2 row-major (D x N_h), B1, B2.
struct FeatureMapParams {
    FeatureMapKind kind = FeatureMapKind::Linear;
    std::vector<double> genes;

    double w(int row, int col) const { return genes[row * kNumBaseFeatures + col]; }
    double w1(int hidden, int col) const { return genes[hidden * kNumBaseFeatures + col]; }
    double w2(int row, int hidden) const {
        return genes[kNumBaseFeatures * kHiddenUnits + row * kHiddenUnits + hidden];
    }
    double b1() const { return genes[kNumBaseFeatures * kHiddenUnits + kHiddenUnits * kTargetFeatures]; }
    double b2() const { return genes[kNumBaseFeatures * kHiddenUnits + kHiddenUnits * kTargetFeatures + 1]; }
};

inline FeatureMapParams decode(std::vector<double> genes, FeatureMapKind kind) {
    if (static_cast<int>(genes.size()) != meta_genotype_length(kind))
        throw std::invalid_argument("decode: meta-genotype length does not match feature-map kind");
    return FeatureMapParams{kind, std::move(genes)};
}

using TargetFeatures = std::array<double, kTargetFeatures>;

/// Row-normalised linear map followed by expanding normalisation to the
/// empirical range [0.20, 0.80] and a clamp. All-zero rows map to 0.5.
inline TargetFeatures apply_linear(const FeatureMapParams& params, const BaseFeatures& b) {
    TargetFeatures beta;
    for (int i = 0; i < kTargetFeatures; ++i) {
        double row_sum = 0.0;
        double acc = 0.0;
        for (int j = 0; j < kNumBaseFeatures; ++j) {
            row_sum += params.w(i, j);
            acc += params.w(i, j) * b[j];
        }
        if (row_sum <= 0.0) {
            beta[i] = 0.5;
            continue;
        }
        const double v = (acc / row_sum - kNormaliseLow) / (kNormaliseHigh - kNormaliseLow);
        beta[i] = std::clamp(v, 0.0, 1.0);
    }
    return beta;
}

/// beta_i = b_{argmax_j W_ij}; ties broken by lowest column index.
inline TargetFeatures apply_selection(const FeatureMapParams& params, const BaseFeatures& b) {
    TargetFeatures beta;
    for (int i = 0; i < kTargetFeatures; ++i) {
        int best = 0;
        for (int j = 1; j < kNumBaseFeatures; ++j)
            if (params.w(i, j) > params.w(i, best)) best = j;
        beta[i] = b[best];
    }
    return beta;
}

/// Scaled sigmoid S_N(x) = 1 / (1 + exp(-alpha_s * x / (N + 1))).
inline double scaled_sigmoid(double x, int n_inputs) {
    return 1.0 / (1.0 + std::exp(-kSigmoidScale * x / (n_inputs + 1)));
}

/// Single-hidden-layer network: h = S_Nb(W1 b + B1), beta = S_Nh(W2 h + B2).
inline TargetFeatures apply_nonlinear(const FeatureMapParams& params, const BaseFeatures& b) {
    std::array<double, kHiddenUnits> hidden;
    for (int k = 0; k < kHiddenUnits; ++k) {
        double acc = params.b1();
        for (int j = 0; j < kNumBaseFeatures; ++j) acc += params.w1(k, j) * b[j];
        hidden[k] = scaled_sigmoid(acc, kNumBaseFeatures);
    }
    TargetFeatures beta;
    for (int i = 0; i < kTargetFeatures; ++i) {
        double acc = params.b2();
        for (int k = 0; k < kHiddenUnits; ++k) acc += params.w2(i, k) * hidden[k];
        beta[i] = scaled_sigmoid(acc, kHiddenUnits);
    }
    return beta;
}

inline TargetFeatures apply_feature_map(const FeatureMapParams& params, const BaseFeatures& b) {
    switch (params.kind) {
    case FeatureMapKind::Linear: return apply_linear(params, b);
    case FeatureMapKind::Selection: return apply_selection(params, b);
    case FeatureMapKind::NonLinear: return apply_nonlinear(params, b);
    }
    throw std::logic_error("apply: unreachable");
}

// ---------------------------------------------------------------------------
// Behaviour spaces: what turns 14 base-features into an archive descriptor.

enum class BaselineKind { Position, Polar, JointPairAngle, AngleSum };

inline const char* to_string(BaselineKind kind) {
    switch (kind) {
    case BaselineKind::Position: return "position";
    case BaselineKind::Polar: return "polar";
    case BaselineKind::JointPairAngle: return "jointpairangle";
    case BaselineKind::AngleSum: return "anglesum";
    }
    return "?";
}

struct BehaviourSpace {
    std::string name;
    int dims = kTargetFeatures;
    int bins_per_dim = 8;
    std::function<std::vector<double>(const BaseFeatures&)> descriptor;

    BehaviourMap make_map() const { return BehaviourMap(dims, bins_per_dim); }
};

/// Baseline spaces are fixed slices of the base-feature vector.
inline BehaviourSpace baseline_space(BaselineKind kind) {
    int offset = 0;
    int dims = 2;
    switch (kind) {
    case BaselineKind::Position: offset = 0; dims = 2; break;
    case BaselineKind::Polar: offset = 2; dims = 2; break;
    case BaselineKind::JointPairAngle: offset = 4; dims = 4; break;
    case BaselineKind::AngleSum: offset = 8; dims = 6; break;
    }
    BehaviourSpace space;
    space.name = to_string(kind);
    space.dims = dims;
    space.bins_per_dim = default_bins_per_dim(dims);
    space.descriptor = [offset, dims](const BaseFeatures& b) {
        return std::vector<double>(b.begin() + offset, b.begin() + offset + dims);
    };
    return space;
}

inline BehaviourSpace feature_map_space(FeatureMapParams params) {
    BehaviourSpace space;
    space.name = to_string(params.kind);
    space.dims = kTargetFeatures;
    space.bins_per_dim = default_bins_per_dim(kTargetFeatures);
    space.descriptor = [params = std::move(params)](const BaseFeatures& b) {
        const TargetFeatures beta = apply_feature_map(params, b);
        return std::vector<double>(beta.begin(), beta.end());
    };
    return space;
}

/// Random feature-map parameters drawn uniformly from the meta-genotype box.
inline FeatureMapParams random_feature_map(FeatureMapKind kind, Rng& rng) {
    const Box box = meta_box(kind);
    std::uniform_real_distribution<double> gene(box.lo, box.hi);
    std::vector<double> genes(meta_genotype_length(kind));
    for (double& g : genes) g = gene(rng);
    return FeatureMapParams{kind, std::move(genes)};
}

} // namespace qdmeta
