#pragma once

// Reference implementations used only by tests. They stay independent of the
// library's computation paths: kinematics via complex rotation products,
// intersection via a parametric solve, map construction via an ordered map.

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "qdmeta/arm.hpp"
#include "qdmeta/database.hpp"
#include "qdmeta/feature_map.hpp"

namespace oracle {

/// Arm joint positions as complex numbers: direction starts at -i and each
/// joint multiplies in a unit rotation exp(i*theta).
inline std::vector<std::complex<double>> arm_points(const qdmeta::Genotype& genotype,
                                                    const qdmeta::Damage& damage) {
    using namespace std::complex_literals;
    std::array<double, qdmeta::kNumJoints> theta;
    for (int i = 0; i < qdmeta::kNumJoints; ++i)
        theta[i] = std::numbers::pi * (genotype[i] - 0.5);
    if (damage.kind == qdmeta::Damage::Kind::StuckJoint) {
        theta[damage.joint - 1] = damage.value;
    } else if (damage.kind == qdmeta::Damage::Kind::Offset) {
        double& t = theta[damage.joint - 1];
        t = std::max(-std::numbers::pi / 2, std::min(std::numbers::pi / 2, t + damage.value));
    }

    std::vector<std::complex<double>> points{0.0 + 0.0i};
    std::complex<double> direction = -1.0i;
    for (int i = 0; i < qdmeta::kNumJoints; ++i) {
        direction *= std::exp(1.0i * theta[i]);
        points.push_back(points.back() + qdmeta::kSegmentLength * direction);
    }
    return points;
}

/// Parametric segment intersection: solves p1 + t d1 = p2 + u d2 and checks
/// t, u in [0,1]; parallel/collinear cases via interval overlap on projections.
inline bool segments_intersect(qdmeta::Vec2 p1, qdmeta::Vec2 q1, qdmeta::Vec2 p2,
                               qdmeta::Vec2 q2) {
    const double d1x = q1.x - p1.x, d1y = q1.y - p1.y;
    const double d2x = q2.x - p2.x, d2y = q2.y - p2.y;
    const double denom = d1x * d2y - d1y * d2x;
    const double rx = p2.x - p1.x, ry = p2.y - p1.y;

    if (denom != 0.0) {
        const double t = (rx * d2y - ry * d2x) / denom;
        const double u = (rx * d1y - ry * d1x) / denom;
        return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
    }
    // parallel: intersect only if collinear and the 1-D projections overlap
    if (rx * d1y - ry * d1x != 0.0) return false;
    const bool use_x = std::abs(d1x) >= std::abs(d1y);
    auto coord = [use_x](qdmeta::Vec2 v) { return use_x ? v.x : v.y; };
    double a_lo = std::min(coord(p1), coord(q1)), a_hi = std::max(coord(p1), coord(q1));
    double b_lo = std::min(coord(p2), coord(q2)), b_hi = std::max(coord(p2), coord(q2));
    return std::max(a_lo, b_lo) <= std::min(a_hi, b_hi);
}

/// Direct transcription of the fitness formula.
inline double fitness(const qdmeta::Genotype& g) {
    double mean = 0.0;
    for (int i = 0; i < 8; ++i) mean += g[i];
    mean /= 8.0;
    double sum = 0.0;
    for (int i = 0; i < 8; ++i) sum += (g[i] - mean) * (g[i] - mean);
    return -sum / 8.0;
}

/// O(n) reference map construction: best fitness per cell, first-come on ties.
struct ReferenceCell {
    qdmeta::Genotype genotype;
    double fitness;
};

inline std::map<std::vector<int>, ReferenceCell>
reference_map(const std::vector<qdmeta::SolutionRecord>& records,
              const qdmeta::BehaviourSpace& space) {
    std::map<std::vector<int>, ReferenceCell> cells;
    for (const qdmeta::SolutionRecord& rec : records) {
        std::vector<double> desc = space.descriptor(rec.base_features);
        std::vector<int> idx(desc.size());
        for (std::size_t j = 0; j < desc.size(); ++j) {
            double d = std::clamp(desc[j], 0.0, 1.0);
            idx[j] = std::min(static_cast<int>(d * space.bins_per_dim),
                              space.bins_per_dim - 1);
        }
        auto it = cells.find(idx);
        if (it == cells.end() || rec.fitness > it->second.fitness)
            cells[idx] = {rec.genotype, rec.fitness};
    }
    return cells;
}

/// Pair-count Cliff's delta.
inline double cliffs_delta(const std::vector<double>& a, const std::vector<double>& b) {
    long long more = 0, less = 0;
    for (double x : a)
        for (double y : b) {
            more += x > y;
            less += x < y;
        }
    return static_cast<double>(more - less) / (1.0 * a.size() * b.size());
}

} // namespace oracle
