#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "qdmeta/geometry.hpp"
#include "qdmeta/rng.hpp"

namespace qdmeta {

inline constexpr int kNumJoints = 8;
inline constexpr int kNumBaseFeatures = 14;
inline constexpr double kSegmentLength = 0.0775;
inline constexpr double kArmLength = kSegmentLength * kNumJoints; // 0.62 m
inline constexpr double kGeneStep = 0.025;
inline constexpr int kGeneLevels = 41; // 0, 0.025, ..., 1.0
inline constexpr double kJointLimit = std::numbers::pi / 2.0;

/// Joint commands: 8 values in [0,1], each a multiple of 0.025.
using Genotype = std::array<double, kNumJoints>;
using BaseFeatures = std::array<double, kNumBaseFeatures>;

inline bool gene_on_grid(double g) {
    if (g < 0.0 || g > 1.0) return false;
    const double steps = g / kGeneStep;
    return std::abs(steps - std::round(steps)) < 1e-9;
}

inline bool genotype_is_valid(const Genotype& g) {
    for (double v : g)
        if (!gene_on_grid(v)) return false;
    return true;
}

/// Uniform draw over the 41-point grid per gene.
inline Genotype random_genotype(Rng& rng) {
    std::uniform_int_distribution<int> level(0, kGeneLevels - 1);
    Genotype g;
    for (double& v : g) v = level(rng) * kGeneStep;
    return g;
}

struct Damage {
    enum class Kind { None, StuckJoint, Offset };

    Kind kind = Kind::None;
    int joint = 0;      // 1-based, meaningful for StuckJoint/Offset
    double value = 0.0; // stuck angle or offset epsilon, radians

    static Damage none() { return {}; }

    static Damage stuck(int joint, double angle) {
        if (joint < 1 || joint > kNumJoints)
            throw std::invalid_argument("Damage::stuck: joint out of range");
        if (angle < -kJointLimit || angle > kJointLimit)
            throw std::invalid_argument("Damage::stuck: angle outside joint range");
        return {Kind::StuckJoint, joint, angle};
    }

    static Damage offset(double epsilon, int joint) {
        if (joint < 1 || joint > kNumJoints)
            throw std::invalid_argument("Damage::offset: joint out of range");
        if (epsilon < -std::numbers::pi || epsilon > std::numbers::pi)
            throw std::invalid_argument("Damage::offset: epsilon outside [-pi, pi]");
        return {Kind::Offset, joint, epsilon};
    }
};

struct ArmPose {
    std::array<Vec2, kNumJoints + 1> joint_positions; // base at [0], end-effector at [8]
    std::array<double, kNumJoints> joint_angles;      // radians, post-damage

    Vec2 end_effector() const { return joint_positions[kNumJoints]; }
};

struct Evaluation {
    BaseFeatures base_features; // from the undamaged (commanded) pose
    double fitness = 0.0;
    Vec2 end_effector;          // from the damaged pose
    bool safe = true;           // of the damaged pose
};

/// Joint angles theta_i = pi*(g_i - 0.5), then damage applied. Base at the
/// origin, reference direction straight down (0,-1), each joint rotating
/// counter-clockwise-positive relative to the previous segment's direction.
inline ArmPose forward_kinematics(const Genotype& genotype, const Damage& damage = Damage::none()) {
    ArmPose pose;
    for (int i = 0; i < kNumJoints; ++i)
        pose.joint_angles[i] = std::numbers::pi * (genotype[i] - 0.5);

    switch (damage.kind) {
    case Damage::Kind::None:
        break;
    case Damage::Kind::StuckJoint:
        pose.joint_angles[damage.joint - 1] = damage.value;
        break;
    case Damage::Kind::Offset: {
        double& theta = pose.joint_angles[damage.joint - 1];
        theta = std::clamp(theta + damage.value, -kJointLimit, kJointLimit);
        break;
    }
    }

    pose.joint_positions[0] = Vec2{0.0, 0.0};
    double heading = 0.0; // rotation from (0,-1), CCW positive
    for (int i = 0; i < kNumJoints; ++i) {
        heading += pose.joint_angles[i];
        const Vec2 dir{std::sin(heading), -std::cos(heading)};
        pose.joint_positions[i + 1] = pose.joint_positions[i] + kSegmentLength * dir;
    }
    return pose;
}

/// False iff any non-adjacent segment pair intersects or any point lies in
/// the wall half-plane y > 0. Adjacent segments share a joint and are exempt.
inline bool check_safe(const ArmPose& pose) {
    for (const Vec2& p : pose.joint_positions)
        if (p.y > 0.0) return false;

    for (int i = 0; i < kNumJoints; ++i) {
        for (int j = i + 2; j < kNumJoints; ++j) {
            if (segments_intersect(pose.joint_positions[i], pose.joint_positions[i + 1],
                                   pose.joint_positions[j], pose.joint_positions[j + 1]))
                return false;
        }
    }
    return true;
}

/// Negative variance of the gene values: -(1/8) sum (g_i - mean)^2, in [-0.25, 0].
inline double fitness(const Genotype& genotype) {
    double mean = 0.0;
    for (double g : genotype) mean += g;
    mean /= kNumJoints;
    double var = 0.0;
    for (double g : genotype) var += (g - mean) * (g - mean);
    return -var / kNumJoints;
}

namespace detail {

// Angle of v in the standard convention, mapped to (0, 2pi]; for the lower
// half-plane (y <= 0) the result lies in [pi, 2pi].
inline double lower_halfplane_angle(Vec2 v) {
    double theta = std::atan2(v.y, v.x);
    if (theta <= 0.0) theta += 2.0 * std::numbers::pi;
    return theta;
}

// Orientation of the chord a->b in world frame, mapped into [0, 2pi).
inline double chord_orientation(Vec2 a, Vec2 b) {
    double theta = std::atan2(b.y - a.y, b.x - a.x);
    if (theta < 0.0) theta += 2.0 * std::numbers::pi;
    return theta;
}

} // namespace detail

/// The 14 base-features, in order: Position (2), Polar (2), JointPairAngle (4),
/// AngleSum (6). The pose must come from an undamaged evaluation of `genotype`.
inline BaseFeatures base_features(const ArmPose& pose, const Genotype& genotype) {
    BaseFeatures b;
    const Vec2 end = pose.end_effector();

    // Position: normalised from [-L,L] x [-L,0].
    b[0] = (end.x + kArmLength) / (2.0 * kArmLength);
    b[1] = -end.y / kArmLength;

    // Polar: radius over L and semicircle angle in [pi, 2pi] mapped to [0,1].
    b[2] = norm(end) / kArmLength;
    b[3] = (detail::lower_halfplane_angle(end) - std::numbers::pi) / std::numbers::pi;

    // JointPairAngle: absolute chord orientation joint i-2 -> joint i, i in {2,4,6,8}.
    for (int k = 0; k < 4; ++k) {
        const int i = 2 * (k + 1);
        const double theta =
            detail::chord_orientation(pose.joint_positions[i - 2], pose.joint_positions[i]);
        b[4 + k] = theta / (2.0 * std::numbers::pi);
    }

    // AngleSum: sliding-window means of gene triplets (g1..g3) ... (g6..g8).
    for (int k = 0; k < 6; ++k)
        b[8 + k] = (genotype[k] + genotype[k + 1] + genotype[k + 2]) / 3.0;

    for (double& v : b) v = std::clamp(v, 0.0, 1.0);
    return b;
}

/// Full bottom-level evaluation. Base-features always characterise the
/// commanded (undamaged) pose; end-effector and safety reflect the damaged one.
inline Evaluation evaluate(const Genotype& genotype, const Damage& damage = Damage::none()) {
    Evaluation ev;
    const ArmPose undamaged = forward_kinematics(genotype, Damage::none());
    ev.base_features = base_features(undamaged, genotype);
    ev.fitness = fitness(genotype);
    if (damage.kind == Damage::Kind::None) {
        ev.end_effector = undamaged.end_effector();
        ev.safe = check_safe(undamaged);
    } else {
        const ArmPose damaged = forward_kinematics(genotype, damage);
        ev.end_effector = damaged.end_effector();
        ev.safe = check_safe(damaged);
    }
    return ev;
}

} // namespace qdmeta
