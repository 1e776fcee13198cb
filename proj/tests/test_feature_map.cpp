#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qdmeta/feature_map.hpp"

using namespace qdmeta;
using Catch::Approx;

namespace {

BaseFeatures all_features(double v) {
    BaseFeatures b;
    b.fill(v);
    return b;
}

FeatureMapParams zero_params(FeatureMapKind kind) {
    return decode(std::vector<double>(meta_genotype_length(kind), 0.0), kind);
}

} // namespace

TEST_CASE("meta-genotype lengths and boxes") {
    REQUIRE(meta_genotype_length(FeatureMapKind::Linear) == 56);
    REQUIRE(meta_genotype_length(FeatureMapKind::Selection) == 56);
    REQUIRE(meta_genotype_length(FeatureMapKind::NonLinear) == 182);
    REQUIRE(meta_genotype_length(FeatureMapKind::NonLinear, true) == 183);

    REQUIRE(meta_box(FeatureMapKind::Linear).lo == 0.0);
    REQUIRE(meta_box(FeatureMapKind::Linear).hi == 1.0);
    REQUIRE(meta_box(FeatureMapKind::NonLinear).lo == -1.0);
    REQUIRE(meta_box(FeatureMapKind::NonLinear).hi == 1.0);
}

TEST_CASE("decode layout") {
    SECTION("zeros give a zero matrix") {
        const FeatureMapParams p = zero_params(FeatureMapKind::Linear);
        for (int r = 0; r < kTargetFeatures; ++r)
            for (int c = 0; c < kNumBaseFeatures; ++c) REQUIRE(p.w(r, c) == 0.0);
    }

    SECTION("non-linear tail holds the biases") {
        std::vector<double> genes(182, 0.0);
        genes[180] = 0.3;
        genes[181] = -0.2;
        const FeatureMapParams p = decode(std::move(genes), FeatureMapKind::NonLinear);
        REQUIRE(p.b1() == 0.3);
        REQUIRE(p.b2() == -0.2);
    }

    SECTION("selection genes fill W row-major") {
        std::vector<double> genes(56);
        for (int i = 0; i < 56; ++i) genes[i] = i / 100.0;
        const FeatureMapParams p = decode(std::move(genes), FeatureMapKind::Selection);
        REQUIRE(p.w(0, 0) == Approx(0.00));
        REQUIRE(p.w(1, 0) == Approx(0.14));
        REQUIRE(p.w(0, 13) == Approx(0.13));
    }

    SECTION("length mismatch is a configuration error") {
        REQUIRE_THROWS_AS(decode(std::vector<double>(55, 0.0), FeatureMapKind::Linear),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(decode(std::vector<double>(56, 0.0), FeatureMapKind::NonLinear),
                          std::invalid_argument);
    }

    SECTION("decode keeps genes intact (flatten identity)") {
        std::vector<double> genes(56);
        for (int i = 0; i < 56; ++i) genes[i] = std::sin(i);
        const FeatureMapParams p = decode(genes, FeatureMapKind::Linear);
        REQUIRE(p.genes == genes);
    }
}

TEST_CASE("linear feature-map") {
    SECTION("one-hot row passes the feature through the normalisation") {
        std::vector<double> genes(56, 0.0);
        genes[0 * kNumBaseFeatures + 3] = 1.0; // row 0 selects feature 3
        const FeatureMapParams p = decode(std::move(genes), FeatureMapKind::Linear);
        BaseFeatures b = all_features(0.0);
        b[3] = 0.5;
        REQUIRE(apply_linear(p, b)[0] == Approx((0.5 - 0.2) / 0.6));
    }

    SECTION("inputs at the lower normalisation anchor map to zero") {
        std::vector<double> genes(56, 0.3);
        const FeatureMapParams p = decode(std::move(genes), FeatureMapKind::Linear);
        const TargetFeatures beta = apply_linear(p, all_features(0.20));
        for (double v : beta) REQUIRE(v == Approx(0.0).margin(1e-12));
    }

    SECTION("large inputs clamp to one") {
        std::vector<double> genes(56, 0.7);
        const FeatureMapParams p = decode(std::move(genes), FeatureMapKind::Linear);
        const TargetFeatures beta = apply_linear(p, all_features(0.9));
        for (double v : beta) REQUIRE(v == 1.0);
    }

    SECTION("degenerate all-zero rows output 0.5") {
        const TargetFeatures beta =
            apply_linear(zero_params(FeatureMapKind::Linear), all_features(0.9));
        for (double v : beta) REQUIRE(v == 0.5);
    }
}

TEST_CASE("selection feature-map") {
    SECTION("argmax column wins") {
        std::vector<double> genes(56, 0.1);
        genes[0 * kNumBaseFeatures + 3] = 0.9;
        const FeatureMapParams p = decode(std::move(genes), FeatureMapKind::Selection);
        BaseFeatures b = all_features(0.2);
        b[3] = 0.7;
        REQUIRE(apply_selection(p, b)[0] == 0.7);
    }

    SECTION("ties break to the lowest index") {
        const FeatureMapParams p = zero_params(FeatureMapKind::Selection);
        BaseFeatures b = all_features(0.2);
        b[0] = 0.9;
        const TargetFeatures beta = apply_selection(p, b);
        for (double v : beta) REQUIRE(v == 0.9);
    }

    SECTION("one-hot rows on 0..3 select the first four features") {
        std::vector<double> genes(56, 0.0);
        for (int r = 0; r < 4; ++r) genes[r * kNumBaseFeatures + r] = 1.0;
        const FeatureMapParams p = decode(std::move(genes), FeatureMapKind::Selection);
        BaseFeatures b{};
        for (int j = 0; j < kNumBaseFeatures; ++j) b[j] = j / 14.0;
        const TargetFeatures beta = apply_selection(p, b);
        for (int r = 0; r < 4; ++r) REQUIRE(beta[r] == b[r]);
    }

    SECTION("outputs are components of the input") {
        Rng rng = make_rng(13);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int trial = 0; trial < 1000; ++trial) {
            const FeatureMapParams p = random_feature_map(FeatureMapKind::Selection, rng);
            BaseFeatures b;
            for (double& v : b) v = unit(rng);
            for (double out : apply_selection(p, b))
                REQUIRE(std::count(b.begin(), b.end(), out) > 0);
        }
    }
}

TEST_CASE("non-linear feature-map") {
    SECTION("all-zero network outputs 0.5 exactly") {
        const TargetFeatures beta =
            apply_nonlinear(zero_params(FeatureMapKind::NonLinear), all_features(0.7));
        for (double v : beta) REQUIRE(v == 0.5);
    }

    SECTION("output sigmoid value for f = +5") {
        // direct oracle evaluation of S_10(5) = 1/(1+exp(-30*5/11))
        const double expected = 1.0 / (1.0 + std::exp(-30.0 * 5.0 / 11.0));
        REQUIRE(scaled_sigmoid(5.0, kHiddenUnits) == Approx(expected).epsilon(1e-15));
        REQUIRE(scaled_sigmoid(5.0, kHiddenUnits) > 0.999998);
    }

    SECTION("sigmoid is monotone with S(0) = 0.5") {
        REQUIRE(scaled_sigmoid(0.0, kNumBaseFeatures) == 0.5);
        double prev = -1.0;
        for (double x = -6.0; x <= 6.0; x += 0.25) {
            const double s = scaled_sigmoid(x, kNumBaseFeatures);
            REQUIRE(s > prev);
            prev = s;
        }
    }

    SECTION("negating the output layer reflects the result around 0.5") {
        Rng rng = make_rng(37);
        for (int trial = 0; trial < 200; ++trial) {
            FeatureMapParams p = random_feature_map(FeatureMapKind::NonLinear, rng);
            BaseFeatures b;
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (double& v : b) v = unit(rng);
            const TargetFeatures beta = apply_nonlinear(p, b);

            FeatureMapParams mirrored = p;
            for (int i = kNumBaseFeatures * kHiddenUnits;
                 i < static_cast<int>(mirrored.genes.size()); ++i)
                mirrored.genes[i] = -mirrored.genes[i];
            const TargetFeatures reflected = apply_nonlinear(mirrored, b);
            for (int i = 0; i < kTargetFeatures; ++i)
                REQUIRE(beta[i] + reflected[i] == Approx(1.0).margin(1e-12));
        }
    }

    SECTION("small input perturbations stay bounded") {
        Rng rng = make_rng(43);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double delta = 1e-6;
        for (int trial = 0; trial < 100; ++trial) {
            const FeatureMapParams p = random_feature_map(FeatureMapKind::NonLinear, rng);
            BaseFeatures b;
            for (double& v : b) v = unit(rng);
            BaseFeatures nudged = b;
            nudged[trial % kNumBaseFeatures] =
                std::clamp(nudged[trial % kNumBaseFeatures] + delta, 0.0, 1.0);
            const TargetFeatures beta = apply_nonlinear(p, b);
            const TargetFeatures beta2 = apply_nonlinear(p, nudged);
            for (int i = 0; i < kTargetFeatures; ++i)
                REQUIRE(std::abs(beta2[i] - beta[i]) <= 100.0 * delta);
        }
    }
}

TEST_CASE("every feature-map keeps outputs in the unit hypercube") {
    Rng rng = make_rng(53);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const FeatureMapKind kinds[] = {FeatureMapKind::Linear, FeatureMapKind::Selection,
                                    FeatureMapKind::NonLinear};
    for (int trial = 0; trial < 100000; ++trial) {
        const FeatureMapKind kind = kinds[trial % 3];
        const FeatureMapParams p = random_feature_map(kind, rng);
        BaseFeatures b;
        for (double& v : b) v = unit(rng);
        for (double out : apply_feature_map(p, b)) {
            REQUIRE(out >= 0.0);
            REQUIRE(out <= 1.0);
        }
    }
}

TEST_CASE("behaviour space wiring") {
    const BehaviourSpace position = baseline_space(BaselineKind::Position);
    REQUIRE(position.dims == 2);
    REQUIRE(position.bins_per_dim == 64);

    const BehaviourSpace polar = baseline_space(BaselineKind::Polar);
    const BehaviourSpace jpa = baseline_space(BaselineKind::JointPairAngle);
    const BehaviourSpace asum = baseline_space(BaselineKind::AngleSum);
    REQUIRE(jpa.dims == 4);
    REQUIRE(jpa.bins_per_dim == 8);
    REQUIRE(asum.dims == 6);
    REQUIRE(asum.bins_per_dim == 4);

    BaseFeatures b;
    for (int j = 0; j < kNumBaseFeatures; ++j) b[j] = j / 14.0;
    REQUIRE(position.descriptor(b) == std::vector<double>{b[0], b[1]});
    REQUIRE(polar.descriptor(b) == std::vector<double>{b[2], b[3]});
    REQUIRE(jpa.descriptor(b) == std::vector<double>{b[4], b[5], b[6], b[7]});
    REQUIRE(asum.descriptor(b) ==
            std::vector<double>{b[8], b[9], b[10], b[11], b[12], b[13]});

    Rng rng = make_rng(3);
    const BehaviourSpace meta = feature_map_space(random_feature_map(FeatureMapKind::NonLinear, rng));
    REQUIRE(meta.dims == 4);
    REQUIRE(meta.bins_per_dim == 8);
    REQUIRE(meta.descriptor(b).size() == 4);
}
