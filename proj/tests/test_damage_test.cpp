#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "oracles.hpp"
#include "qdmeta/damage_test.hpp"

using namespace qdmeta;
using Catch::Approx;

TEST_CASE("test damage set enumerates 160 offsets") {
    const std::vector<Damage> damages = test_damage_set();
    REQUIRE(damages.size() == 160);
    std::set<std::pair<int, int>> seen;
    for (const Damage& d : damages) {
        REQUIRE(d.kind == Damage::Kind::Offset);
        REQUIRE(d.joint >= 1);
        REQUIRE(d.joint <= 8);
        REQUIRE(d.value != 0.0);
        REQUIRE(std::abs(d.value) <= std::numbers::pi + 1e-12);
        const int tenth = static_cast<int>(std::round(d.value / std::numbers::pi * 10));
        REQUIRE(tenth != 0);
        REQUIRE(std::abs(d.value - tenth / 10.0 * std::numbers::pi) < 1e-12);
        seen.insert({d.joint, tenth});
    }
    REQUIRE(seen.size() == 160); // 8 joints x 20 offsets, zero excluded
}

TEST_CASE("target grid covers the lower semicircle") {
    const std::vector<Vec2> targets = target_points();
    REQUIRE(targets.size() == 20 * 36);
    for (const Vec2& t : targets) {
        REQUIRE(t.y <= 1e-12);
        REQUIRE(norm(t) <= kArmLength);
        REQUIRE(norm(t) > 0.0);
    }

    const std::vector<Vec2> small = target_points({2, 3});
    REQUIRE(small.size() == 6);
    REQUIRE_THROWS_AS(target_points({0, 5}), std::invalid_argument);
}

TEST_CASE("targets reached by a single straight-down solution") {
    Genotype down;
    down.fill(0.5);
    const std::vector<Genotype> archive{down};
    const Vec2 end = evaluate(down).end_effector;

    // frozen by the geometric oracle: count targets within tolerance directly
    const double tolerance = kDefaultTestTolerance;
    int expected = 0;
    for (const Vec2& t : target_points())
        if (distance(t, end) <= tolerance) ++expected;
    REQUIRE(expected > 0);

    const double pct = targets_reached_pct(archive, Damage::none(), tolerance);
    REQUIRE(pct == Approx(100.0 * expected / 720.0));
}

TEST_CASE("empty archive reaches nothing") {
    const std::vector<Genotype> empty;
    for (const Damage& d : std::vector<Damage>{Damage::none(), Damage::offset(0.5, 3)})
        REQUIRE(targets_reached_pct(empty, d, kDefaultTestTolerance) == 0.0);

    const DamageTestResult result = run_damage_test(empty);
    REQUIRE(result.rows.size() == 160);
    for (const DamageTestRow& row : result.rows) REQUIRE(row.pct_reached == 0.0);
    REQUIRE(result.mean == 0.0);
}

TEST_CASE("targets reached is monotone in tolerance and bounded") {
    Rng rng = make_rng(41);
    std::vector<Genotype> archive;
    for (int i = 0; i < 200; ++i) {
        const Genotype g = random_genotype(rng);
        if (evaluate(g).safe) archive.push_back(g);
    }
    const Damage damage = Damage::offset(0.3 * std::numbers::pi, 2);
    double prev = -1.0;
    for (double tolerance : {0.01, 0.02, 0.031, 0.05, 0.1}) {
        const double pct = targets_reached_pct(archive, damage, tolerance);
        REQUIRE(pct >= 0.0);
        REQUIRE(pct <= 100.0);
        REQUIRE(pct >= prev);
        prev = pct;
    }
}

TEST_CASE("spatial index agrees with brute force") {
    Rng rng = make_rng(43);
    std::vector<Genotype> archive;
    for (int i = 0; i < 100; ++i) archive.push_back(random_genotype(rng));

    const Damage damage = Damage::offset(-0.2 * std::numbers::pi, 5);
    const double tolerance = 0.04;

    std::vector<Vec2> endpoints;
    for (const Genotype& g : archive) {
        const Evaluation ev = evaluate(g, damage);
        if (ev.safe) endpoints.push_back(ev.end_effector);
    }
    int expected = 0;
    for (const Vec2& t : target_points()) {
        bool hit = false;
        for (const Vec2& p : endpoints) hit |= distance(p, t) <= tolerance;
        expected += hit;
    }
    const double pct = targets_reached_pct(archive, damage, tolerance);
    REQUIRE(pct == Approx(100.0 * expected / 720.0));
}

TEST_CASE("cliffs delta") {
    const std::vector<double> a{1, 2, 3};
    REQUIRE(cliffs_delta(a, a) == 0.0);

    const std::vector<double> low{1, 1, 1};
    const std::vector<double> high{2, 3, 4};
    REQUIRE(cliffs_delta(high, low) == 1.0);
    REQUIRE(cliffs_delta(low, high) == -1.0);

    const std::vector<double> b{2, 2, 2};
    REQUIRE(cliffs_delta(a, b) == 0.0); // (1 - 1) / 9

    const std::vector<double> empty;
    REQUIRE_THROWS_AS(cliffs_delta(empty, a), std::invalid_argument);

    SECTION("antisymmetry and oracle agreement on random samples") {
        Rng rng = make_rng(47);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> size(1, 40);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x(size(rng)), y(size(rng));
            for (double& v : x) v = std::round(unit(rng) * 10) / 10;
            for (double& v : y) v = std::round(unit(rng) * 10) / 10;
            const double d = cliffs_delta(x, y);
            REQUIRE(d == Approx(oracle::cliffs_delta(x, y)).margin(1e-15));
            REQUIRE(cliffs_delta(y, x) == Approx(-d).margin(1e-15));
            REQUIRE(d >= -1.0);
            REQUIRE(d <= 1.0);
        }
    }
}
