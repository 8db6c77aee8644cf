#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sot/free_target.hpp"
#include "sot/oracles.hpp"

using namespace sot;

namespace {

MeasureFamily two_point_family() {
    return build_family({{0.0}, {1.0}}, {{0.75, 0.25}, {0.25, 0.75}});
}

MeasureFamily random_family_1d2d(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> dd(1, 2), dm(2, 6), dn(2, 3);
    std::uniform_real_distribution<double> coord(0.0, 1.0), wdist(0.05, 1.0);
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

}  // namespace

TEST_CASE("simplex embedding of the two-point family") {
    auto emb = simplex_embed(two_point_family());
    REQUIRE(emb.points.size() == 2);
    CHECK(emb.points[0][0] == Catch::Approx(0.75));
    CHECK(emb.points[0][1] == Catch::Approx(0.25));
    CHECK(emb.points[1][0] == Catch::Approx(0.25));
    CHECK(emb.points[1][1] == Catch::Approx(0.75));
}

TEST_CASE("identical measures embed onto the center") {
    auto fam = build_family({{0.0}, {1.0}}, {{0.5, 0.5}, {0.5, 0.5}});
    auto emb = simplex_embed(fam);
    for (const auto& p : emb.points) {
        CHECK(p[0] == Catch::Approx(0.5));
        CHECK(p[1] == Catch::Approx(0.5));
    }
}

TEST_CASE("disjoint supports embed onto simplex vertices") {
    auto fam = build_family({{0.0}, {1.0}}, {{1.0, 0.0}, {0.0, 1.0}});
    auto emb = simplex_embed(fam);
    CHECK(emb.points[0][0] == Catch::Approx(1.0));
    CHECK(emb.points[0][1] == Catch::Approx(0.0).margin(1e-15));
    CHECK(emb.points[1][1] == Catch::Approx(1.0));
}

TEST_CASE("embedding properties on random families") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        auto fam = random_family_1d2d(rng);
        auto emb = simplex_embed(fam);
        for (std::size_t k = 0; k < fam.m(); ++k) {
            double s = 0.0;
            for (double v : emb.points[k]) {
                CHECK(v >= -1e-15);
                s += v;
            }
            CHECK(s == Catch::Approx(1.0));
        }
        // mean of the embedded points is the simplex center
        for (std::size_t i = 0; i < fam.n(); ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < fam.m(); ++k) s += emb.weights[k] * emb.points[k][i];
            CHECK(std::abs(s - 1.0 / static_cast<double>(fam.n())) <= 1e-8);
        }
    }
}

TEST_CASE("identical measures give singleton candidates") {
    auto fam = build_family({{0.0}, {1.0}, {2.0}},
                            {{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}});
    auto cands = enumerate_minimal_subsets(fam, simplex_embed(fam));
    REQUIRE(cands.size() == 3);
    for (const auto& c : cands) {
        CHECK(c.indices.size() == 1);
        CHECK(c.weights[0] == Catch::Approx(1.0));
        CHECK(c.local_cost == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("two-point family has the single straddling pair") {
    auto fam = two_point_family();
    auto cands = enumerate_minimal_subsets(fam, simplex_embed(fam));
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].indices == std::vector<std::size_t>{0, 1});
    CHECK(cands[0].weights[0] == Catch::Approx(0.5));
    CHECK(cands[0].weights[1] == Catch::Approx(0.5));
    CHECK(cands[0].barycenter[0] == Catch::Approx(0.5));
    CHECK(cands[0].local_cost == Catch::Approx(0.25));
}

TEST_CASE("collinear embeddings keep only minimal straddling pairs") {
    // ratios r_1 = (1.5, 0.65, 1.2) against mean (0.25, 0.5, 0.25)
    std::vector<double> mean{0.25, 0.5, 0.25}, r1{1.5, 0.65, 1.2};
    std::vector<double> mu1(3), mu2(3);
    for (std::size_t k = 0; k < 3; ++k) {
        mu1[k] = r1[k] * mean[k];
        mu2[k] = (2.0 - r1[k]) * mean[k];
    }
    auto fam = build_family({{0.0}, {0.5}, {1.0}}, {mu1, mu2});
    auto cands = enumerate_minimal_subsets(fam, simplex_embed(fam));
    REQUIRE(cands.size() == 2);
    CHECK(cands[0].indices == std::vector<std::size_t>{0, 1});
    CHECK(cands[1].indices == std::vector<std::size_t>{1, 2});
}

TEST_CASE("candidate invariants on random families") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        auto fam = random_family_1d2d(rng);
        auto emb = simplex_embed(fam);
        auto cands = enumerate_minimal_subsets(fam, emb);
        REQUIRE_FALSE(cands.empty());
        for (const auto& c : cands) {
            CHECK(c.indices.size() <= fam.n());
            double ws = 0.0;
            for (double w : c.weights) {
                CHECK(w >= -1e-10);
                ws += w;
            }
            CHECK(ws == Catch::Approx(1.0).margin(1e-8));
            // weights hit the simplex center
            for (std::size_t i = 0; i < fam.n(); ++i) {
                double s = 0.0;
                for (std::size_t a = 0; a < c.indices.size(); ++a)
                    s += c.weights[a] * emb.points[c.indices[a]][i];
                CHECK(std::abs(s - 1.0 / static_cast<double>(fam.n())) <= 1e-7);
            }
        }
        // no candidate contains another (inclusion minimality)
        for (const auto& a : cands)
            for (const auto& b : cands)
                if (a.mask != b.mask) CHECK((a.mask & b.mask) != a.mask);
    }
}

TEST_CASE("threaded enumeration matches the sequential order") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        auto fam = random_family_1d2d(rng);
        auto emb = simplex_embed(fam);
        EnumerationOptions seq, par;
        par.threads = 4;
        auto a = enumerate_minimal_subsets(fam, emb, seq);
        auto b = enumerate_minimal_subsets(fam, emb, par);
        REQUIRE(a.size() == b.size());
        for (std::size_t c = 0; c < a.size(); ++c) {
            CHECK(a[c].indices == b[c].indices);
            CHECK(a[c].weights == b[c].weights);
        }
    }
}

TEST_CASE("solve_free on identical measures is free") {
    auto fam = build_family({{0.0}, {1.0}}, {{0.4, 0.6}, {0.4, 0.6}});
    auto sol = solve_free(fam);
    CHECK(sol.cost == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(sol.target.size() == 2);
    CHECK(sol.target.weights[0] == Catch::Approx(0.4));
    CHECK(sol.target.weights[1] == Catch::Approx(0.6));
}

TEST_CASE("solve_free on the two-point family") {
    auto sol = solve_free(two_point_family());
    CHECK(sol.cost == Catch::Approx(0.25));
    REQUIRE(sol.target.size() == 1);
    CHECK(sol.target.points[0][0] == Catch::Approx(0.5));
    CHECK(sol.target.weights[0] == Catch::Approx(1.0));
}

TEST_CASE("solve_free matches the grid oracle on disjoint uniform supports") {
    auto fam = build_family(
        {{0.0}, {0.25}, {0.5}, {0.75}, {1.0}},
        {{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0, 0.0}, {0.0, 0.0, 1.0 / 3, 1.0 / 3, 1.0 / 3}});
    auto sol = solve_free(fam);
    // grid: uniform plus every candidate barycenter
    std::vector<Point> grid;
    for (std::size_t g = 0; g <= 100; ++g) grid.push_back({g / 100.0});
    for (const auto& c : sol.candidates) grid.push_back(c.barycenter);
    auto oracle = brute_force_free_target(fam, grid);
    CHECK(std::abs(sol.cost - oracle.cost) <= 2e-6);
}

TEST_CASE("free target relaxes every fixed target") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        auto fam = random_family_1d2d(rng);
        auto free_sol = solve_free(fam);
        // compare against a few random fixed targets
        std::uniform_real_distribution<double> coord(0.0, 1.0);
        for (int t = 0; t < 3; ++t) {
            DiscreteMeasure tgt;
            Point p(fam.dim());
            for (auto& x : p) x = coord(rng);
            tgt.points.push_back(p);
            tgt.weights.push_back(1.0);
            auto fixed = solve_fixed({fam, tgt, CostSpec::squared_euclidean()});
            CHECK(free_sol.cost <= fixed.cost + 1e-8);
        }
    }
}

TEST_CASE("refine_targets moves atoms to conditional barycenters") {
    auto fam = two_point_family();
    TransportPlan plan;
    plan.source = fam.support;
    plan.target = {{0.3}};
    plan.matrix = {0.5, 0.5};
    CHECK(plan_cost(plan) == Catch::Approx(0.29));
    auto refined = refine_targets(plan, fam);
    REQUIRE(refined.cols() == 1);
    CHECK(refined.target[0][0] == Catch::Approx(0.5));
    CHECK(plan_cost(refined) == Catch::Approx(0.25));
    // already-refined plans are fixed points
    auto again = refine_targets(refined, fam);
    CHECK(again.target[0][0] == Catch::Approx(0.5));
}

TEST_CASE("refine_targets never increases cost and keeps feasibility") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 30; ++trial) {
        auto fam = random_family_1d2d(rng);
        auto sol = solve_free(fam);
        auto refined = refine_targets(sol.plan, fam);
        CHECK(plan_cost(refined) <= plan_cost(sol.plan) + 1e-10);
        CHECK(check_plan(refined, fam, FreeTarget{}).feasible);
    }
}

TEST_CASE("enumeration caps raise") {
    std::vector<Point> pts;
    std::vector<double> w;
    for (std::size_t k = 0; k < 41; ++k) {
        pts.push_back({static_cast<double>(k)});
        w.push_back(1.0 / 41.0);
    }
    auto fam = build_family(pts, {w, w});
    CHECK_THROWS_AS(enumerate_minimal_subsets(fam, simplex_embed(fam)),
                    EnumerationCapExceededError);
}
