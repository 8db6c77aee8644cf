#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sot/measure.hpp"

using namespace sot;

namespace {

MeasureFamily two_point_family() {
    return build_family({{0.0}, {1.0}}, {{0.75, 0.25}, {0.25, 0.75}});
}

// random family with strictly positive weights, d <= 3, m <= 12, n <= 4
MeasureFamily random_family(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> dd(1, 3), dm(2, 12), dn(1, 4);
    std::uniform_real_distribution<double> coord(-2.0, 2.0), wdist(0.05, 1.0);
    const std::size_t d = dd(rng), m = dm(rng), n = dn(rng);
    std::vector<Point> pts;
    for (std::size_t k = 0; k < m; ++k) {
        Point p(d);
        for (auto& x : p) x = coord(rng);
        pts.push_back(p);
    }
    std::vector<std::vector<double>> ws(n, std::vector<double>(m));
    for (auto& w : ws) {
        double s = 0.0;
        for (auto& v : w) s += (v = wdist(rng));
        for (auto& v : w) v /= s;
    }
    return build_family(pts, ws);
}

DiscreteMeasure random_target(std::mt19937_64& rng, std::size_t d) {
    std::uniform_int_distribution<std::size_t> dl(1, 6);
    std::uniform_real_distribution<double> coord(-2.0, 2.0), wdist(0.05, 1.0);
    DiscreteMeasure t;
    const std::size_t l = dl(rng);
    double s = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
        Point p(d);
        for (auto& x : p) x = coord(rng);
        t.points.push_back(p);
        t.weights.push_back(wdist(rng));
        s += t.weights.back();
    }
    for (auto& w : t.weights) w /= s;
    return t;
}

}  // namespace

TEST_CASE("build_family computes mean and ratios") {
    auto fam = two_point_family();
    REQUIRE(fam.m() == 2);
    REQUIRE(fam.n() == 2);
    CHECK(fam.mean_weights[0] == Catch::Approx(0.5));
    CHECK(fam.mean_weights[1] == Catch::Approx(0.5));
    CHECK(fam.ratios[0][0] == Catch::Approx(1.5));
    CHECK(fam.ratios[0][1] == Catch::Approx(0.5));
    CHECK(fam.ratios[1][0] == Catch::Approx(0.5));
    CHECK(fam.ratios[1][1] == Catch::Approx(1.5));
}

TEST_CASE("build_family with identical measures gives unit ratios") {
    auto fam = build_family({{0.0}, {1.0}}, {{0.5, 0.5}, {0.5, 0.5}});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t k = 0; k < 2; ++k) CHECK(fam.ratios[i][k] == Catch::Approx(1.0));
}

TEST_CASE("build_family with disjoint supports") {
    auto fam = build_family({{0.0}, {1.0}}, {{1.0, 0.0}, {0.0, 1.0}});
    CHECK(fam.ratios[0][0] == Catch::Approx(2.0));
    CHECK(fam.ratios[0][1] == Catch::Approx(0.0));
    CHECK(fam.ratios[1][0] == Catch::Approx(0.0));
    CHECK(fam.ratios[1][1] == Catch::Approx(2.0));
}

TEST_CASE("build_family rejects bad input") {
    CHECK_THROWS_AS(build_family({}, {}), EmptySupportError);
    CHECK_THROWS_AS(build_family({{0.0}}, {{0.7}}), NonProbabilityError);
    CHECK_THROWS_AS(build_family({{0.0}, {1.0}}, {{1.5, -0.5}}), NonProbabilityError);
    CHECK_THROWS_AS(build_family({{0.0}, {0.0}}, {{0.5, 0.5}}), NonProbabilityError);
    CHECK_THROWS_AS(build_family({{0.0}, {1.0, 2.0}}, {{0.5, 0.5}}), DimensionMismatchError);
}

TEST_CASE("build_family drops zero-mean points") {
    auto fam = build_family({{0.0}, {1.0}, {2.0}}, {{0.5, 0.0, 0.5}, {0.5, 0.0, 0.5}});
    REQUIRE(fam.m() == 2);
    REQUIRE(fam.dropped == std::vector<std::size_t>{1});
    CHECK(fam.support[1][0] == 2.0);
}

TEST_CASE("mean of ratios is one at every support point") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto fam = random_family(rng);
        for (std::size_t k = 0; k < fam.m(); ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < fam.n(); ++i) s += fam.ratios[i][k];
            CHECK(std::abs(s / static_cast<double>(fam.n()) - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("product plan is feasible for any family and target") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        auto fam = random_family(rng);
        auto tgt = random_target(rng, fam.dim());
        auto plan = product_plan(fam, tgt);
        auto rep = check_plan(plan, fam, tgt);
        INFO("trial " << trial);
        CHECK(rep.feasible);
    }
}

TEST_CASE("check_plan verdicts on the two-point instance") {
    auto fam = two_point_family();
    DiscreteMeasure half{{{0.5}}, {1.0}};

    TransportPlan good;
    good.source = fam.support;
    good.target = half.points;
    good.matrix = {0.5, 0.5};
    auto rep = check_plan(good, fam, half);
    CHECK(rep.feasible);
    CHECK(rep.max_mixing_residual <= 1e-15);

    TransportPlan bad;
    bad.source = fam.support;
    bad.target = half.points;
    bad.matrix = {1.0, 0.0};
    auto bad_rep = check_plan(bad, fam, half);
    CHECK_FALSE(bad_rep.feasible);
    CHECK(bad_rep.max_mixing_residual == Catch::Approx(0.5));
}

TEST_CASE("check_plan free target returns the induced marginal") {
    auto fam = two_point_family();
    TransportPlan plan;
    plan.source = fam.support;
    plan.target = {{0.5}};
    plan.matrix = {0.5, 0.5};
    auto rep = check_plan(plan, fam, FreeTarget{});
    CHECK(rep.feasible);
    REQUIRE(rep.induced_target.size() == 1);
    CHECK(rep.induced_target[0] == Catch::Approx(1.0));
}

TEST_CASE("plan_cost") {
    auto fam = two_point_family();
    SECTION("diagonal identity plan costs zero") {
        TransportPlan plan;
        plan.source = plan.target = fam.support;
        plan.matrix = {0.5, 0.0, 0.0, 0.5};
        CHECK(plan_cost(plan) == 0.0);
    }
    SECTION("two-point column to the midpoint") {
        TransportPlan plan;
        plan.source = fam.support;
        plan.target = {{0.5}};
        plan.matrix = {0.5, 0.5};
        CHECK(plan_cost(plan) == Catch::Approx(0.25));
    }
    SECTION("explicit all-ones matrix gives total mass") {
        TransportPlan plan;
        plan.source = fam.support;
        plan.target = {{0.5}};
        plan.matrix = {0.5, 0.5};
        auto ones = CostSpec::explicit_matrix({1.0, 1.0}, 2, 1);
        CHECK(plan_cost(plan, ones) == Catch::Approx(1.0));
    }
}

TEST_CASE("plan_cost is linear in the plan matrix") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> adist(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto fam = random_family(rng);
        auto tgt = random_target(rng, fam.dim());
        auto p1 = product_plan(fam, tgt);
        // a second feasible plan: reuse the product of a permuted target
        auto p2 = p1;
        std::shuffle(p2.matrix.begin(), p2.matrix.end(), rng);
        const double a = adist(rng);
        TransportPlan mix = p1;
        for (std::size_t t = 0; t < mix.matrix.size(); ++t)
            mix.matrix[t] = a * p1.matrix[t] + (1.0 - a) * p2.matrix[t];
        const double lhs = plan_cost(mix);
        const double rhs = a * plan_cost(p1) + (1.0 - a) * plan_cost(p2);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
    }
}

TEST_CASE("conditional_on_target") {
    auto fam = two_point_family();
    DiscreteMeasure tgt{{{0.25}, {0.75}}, {0.5, 0.5}};
    auto plan = product_plan(fam, tgt);
    SECTION("product plan conditionals equal the mean measure") {
        for (std::size_t j = 0; j < 2; ++j) {
            auto cond = conditional_on_target(plan, j);
            REQUIRE(cond.size() == 2);
            CHECK(cond.weights[0] == Catch::Approx(0.5));
            CHECK(cond.weights[1] == Catch::Approx(0.5));
        }
    }
    SECTION("single-entry column is a Dirac") {
        TransportPlan dirac;
        dirac.source = fam.support;
        dirac.target = {{0.0}};
        dirac.matrix = {1.0, 0.0};
        auto cond = conditional_on_target(dirac, 0);
        REQUIRE(cond.size() == 1);
        CHECK(cond.weights[0] == Catch::Approx(1.0));
        CHECK(cond.points[0][0] == 0.0);
    }
    SECTION("zero column throws") {
        TransportPlan z;
        z.source = fam.support;
        z.target = {{0.5}};
        z.matrix = {0.0, 0.0};
        CHECK_THROWS_AS(conditional_on_target(z, 0), ZeroColumnError);
    }
}

TEST_CASE("barycentric_function") {
    auto fam = two_point_family();
    SECTION("balanced column gives the midpoint") {
        TransportPlan plan;
        plan.source = fam.support;
        plan.target = {{0.5}};
        plan.matrix = {0.5, 0.5};
        auto g = barycentric_function(plan);
        REQUIRE(g.size() == 1);
        CHECK(g[0].second[0] == Catch::Approx(0.5));
    }
    SECTION("Dirac columns return the source point, sorted by target") {
        TransportPlan plan;
        plan.source = fam.support;
        plan.target = {{2.0}, {1.0}};
        plan.matrix = {0.0, 0.5,   // source 0 -> target 1.0
                       0.5, 0.0};  // source 1 -> target 2.0
        auto g = barycentric_function(plan);
        REQUIRE(g.size() == 2);
        CHECK(g[0].first[0] == 1.0);
        CHECK(g[0].second[0] == Catch::Approx(0.0));
        CHECK(g[1].first[0] == 2.0);
        CHECK(g[1].second[0] == Catch::Approx(1.0));
    }
}
