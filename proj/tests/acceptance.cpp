// Acceptance suite: one pass/fail line per criterion, exit 0 only if all
// pass. Each criterion pins its tolerances inline; oracles (grid search,
// competitor sampling, cycle scans, potential recovery) are independent of
// the solvers they audit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "sot/fixed_target.hpp"
#include "sot/free_target.hpp"
#include "sot/line1d.hpp"
#include "sot/oracles.hpp"

using namespace sot;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    std::string name;
    bool pass = true;
    std::string detail;

    void fail(const std::string& msg) {
        pass = false;
        if (detail.empty()) detail = msg;
    }
};

// ---- randomized instance generators -------------------------------------

MeasureFamily random_family(std::mt19937_64& rng, std::size_t max_d, std::size_t max_m,
                            std::size_t max_n) {
    std::uniform_int_distribution<std::size_t> dd(1, max_d), dm(2, max_m), dn(1, max_n);
    std::uniform_real_distribution<double> coord(0.0, 2.0), wdist(0.05, 1.0);
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

DiscreteMeasure random_target(std::mt19937_64& rng, std::size_t d, std::size_t max_l) {
    std::uniform_int_distribution<std::size_t> dl(1, max_l);
    std::uniform_real_distribution<double> coord(0.0, 2.0), wdist(0.05, 1.0);
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

PiecewiseConstantDensity random_density(std::mt19937_64& rng, double lo_value = 0.25,
                                        double hi_value = 2.0) {
    std::uniform_int_distribution<std::size_t> cells(1, 5);
    std::uniform_real_distribution<double> cut(0.05, 0.95), val(lo_value, hi_value);
    PiecewiseConstantDensity d;
    const std::size_t c = cells(rng);
    std::vector<double> bp{0.0, 1.0};
    for (std::size_t i = 1; i < c; ++i) bp.push_back(cut(rng));
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    d.breakpoints = bp;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) d.values.push_back(val(rng));
    return d.normalized();
}

// ---- bookkeeping shared between criteria ---------------------------------

// every solve_fixed in the suite also records its duality certificate
struct DualRecord {
    double gap = 0.0;
    double violation = 0.0;
};
std::vector<DualRecord> g_dual_records;

// every solver output in the suite is later audited by criterion 10
struct SolveOutput {
    TransportPlan plan;
    MeasureFamily family;
};
std::vector<SolveOutput> g_outputs;

FixedSolution checked_solve_fixed(const SOTInstance& inst) {
    FixedSolution s = solve_fixed(inst);
    DualPotentials dp = dual_potentials(inst, s);
    g_dual_records.push_back(
        {std::abs(s.cost - dp.objective), dual_feasibility_violation(inst, dp)});
    g_outputs.push_back({s.plan, inst.family});
    return s;
}

FreeSolution checked_solve_free(const MeasureFamily& fam) {
    FreeSolution s = solve_free(fam);
    g_outputs.push_back({s.plan, fam});
    return s;
}

// classical single-marginal transport LP, assembled independently of the
// solver under test
double classical_ot_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const std::size_t m = mu.size(), l = nu.size();
    LinearProgram lp;
    lp.rows = m + l;
    lp.cols = m * l;
    lp.objective.resize(lp.cols);
    lp.A.assign(lp.rows * lp.cols, 0.0);
    lp.b.assign(lp.rows, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        lp.b[k] = mu.weights[k];
        for (std::size_t j = 0; j < l; ++j) {
            lp.at(k, k * l + j) = 1.0;
            lp.at(m + j, k * l + j) = 1.0;
            double c = 0.0;
            for (std::size_t t = 0; t < mu.points[k].size(); ++t) {
                const double diff = mu.points[k][t] - nu.points[j][t];
                c += diff * diff;
            }
            lp.objective[k * l + j] = c;
        }
    }
    for (std::size_t j = 0; j < l; ++j) lp.b[m + j] = nu.weights[j];
    LPSolution sol = solve(lp);
    if (sol.status != LPStatus::Optimal) throw InternalInfeasibleError("classical OT LP failed");
    return sol.objective;
}

// ---- criteria -------------------------------------------------------------

Outcome criterion_1() {
    Outcome out{"product-plan feasibility, 200 random families"};
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        auto fam = random_family(rng, 3, 12, 4);
        auto tgt = random_target(rng, fam.dim(), 6);
        auto plan = product_plan(fam, tgt);
        auto rep = check_plan(plan, fam, tgt);
        if (!rep.feasible) {
            out.fail("trial " + std::to_string(trial) + " product plan infeasible");
            break;
        }
    }
    const double dt = seconds_since(t0);
    if (dt >= 5.0) out.fail("runtime " + std::to_string(dt) + " s exceeds 5 s");
    out.detail = out.detail.empty() ? std::to_string(dt).substr(0, 5) + " s" : out.detail;
    return out;
}

Outcome criterion_2() {
    Outcome out{"duality certificates on every fixed-target solve"};
    double worst_gap = 0.0, worst_violation = 0.0;
    for (const auto& r : g_dual_records) {
        worst_gap = std::max(worst_gap, r.gap);
        worst_violation = std::max(worst_violation, r.violation);
    }
    if (g_dual_records.empty()) out.fail("no fixed-target solves were recorded");
    if (worst_gap > 1e-7) out.fail("primal-dual gap " + std::to_string(worst_gap));
    if (worst_violation > 1e-7)
        out.fail("dual inequality violated by " + std::to_string(worst_violation));
    if (out.pass)
        out.detail = std::to_string(g_dual_records.size()) + " solves, gap <= 1e-7";
    return out;
}

Outcome criterion_3() {
    Outcome out{"classical-transport reduction, 50 instances to 1e-9"};
    std::mt19937_64 rng(103);
    std::uniform_int_distribution<std::size_t> copies(2, 4);
    for (int trial = 0; trial < 50; ++trial) {
        // even trials: a single measure; odd trials: identical copies
        auto fam = random_family(rng, 3, 8, 1);
        if (trial % 2 == 1) {
            std::vector<std::vector<double>> ws(copies(rng), fam.measures[0]);
            fam = build_family(fam.support, ws);
        }
        auto tgt = random_target(rng, fam.dim(), 5);
        auto solved = checked_solve_fixed({fam, tgt, CostSpec::squared_euclidean()});
        const double classical = classical_ot_cost(fam.mean_measure(), tgt);
        if (std::abs(solved.cost - classical) > 1e-9) {
            out.fail("trial " + std::to_string(trial) + " differs by " +
                     std::to_string(solved.cost - classical));
            break;
        }
    }
    return out;
}

Outcome criterion_4() {
    Outcome out{"two-point instance: 0.25 / 0.5 / 0.25 and the grid oracle"};
    auto fam = build_family({{0.0}, {1.0}}, {{0.75, 0.25}, {0.25, 0.75}});

    auto mid = checked_solve_fixed({fam, DiscreteMeasure{{{0.5}}, {1.0}}, {}});
    if (std::abs(mid.cost - 0.25) > 1e-9) out.fail("midpoint target cost != 0.25");

    auto ends = checked_solve_fixed({fam, DiscreteMeasure{{{0.0}, {1.0}}, {0.5, 0.5}}, {}});
    if (std::abs(ends.cost - 0.5) > 1e-9) out.fail("endpoint target cost != 0.5");

    auto free_sol = checked_solve_free(fam);
    if (std::abs(free_sol.cost - 0.25) > 1e-9) out.fail("free-target cost != 0.25");
    if (free_sol.target.size() != 1 || std::abs(free_sol.target.points[0][0] - 0.5) > 1e-9)
        out.fail("free target is not the single atom at 0.5");

    std::vector<Point> grid;
    for (std::size_t g = 0; g <= 100; ++g) grid.push_back({static_cast<double>(g) / 100.0});
    auto oracle = brute_force_free_target(fam, grid);
    if (std::abs(oracle.cost - free_sol.cost) > 1e-6)
        out.fail("101-point grid oracle disagrees by " +
                 std::to_string(oracle.cost - free_sol.cost));
    return out;
}

Outcome criterion_5() {
    Outcome out{"embedding averages to the simplex center; candidates have <= n points"};
    std::mt19937_64 rng(105);
    for (int trial = 0; trial < 100; ++trial) {
        auto fam = random_family(rng, 3, 10, 4);
        auto emb = simplex_embed(fam);
        for (std::size_t i = 0; i < emb.n; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < fam.m(); ++k) s += emb.weights[k] * emb.points[k][i];
            if (std::abs(s - 1.0 / static_cast<double>(emb.n)) > 1e-8) {
                out.fail("trial " + std::to_string(trial) + " center identity off by " +
                         std::to_string(s - 1.0 / static_cast<double>(emb.n)));
                return out;
            }
        }
        if (trial % 5 == 0) {
            auto sol = checked_solve_free(fam);
            for (const auto& c : sol.candidates)
                if (c.indices.size() > fam.n()) {
                    out.fail("candidate with " + std::to_string(c.indices.size()) +
                             " points exceeds n = " + std::to_string(fam.n()));
                    return out;
                }
        }
    }
    return out;
}

Outcome criterion_6() {
    Outcome out{"free target equals the seeded grid oracle within 2e-6, 50 families"};
    std::mt19937_64 rng(106);
    for (int trial = 0; trial < 50; ++trial) {
        auto fam = random_family(rng, 2, 7, 3);
        auto sol = checked_solve_free(fam);

        std::vector<Point> grid = fam.support;
        for (const auto& c : sol.candidates) grid.push_back(c.barycenter);
        auto oracle = brute_force_free_target(fam, grid);
        if (oracle.cost < sol.cost - 2e-6 || oracle.cost > sol.cost + 2e-6) {
            out.fail("trial " + std::to_string(trial) + " oracle differs by " +
                     std::to_string(oracle.cost - sol.cost));
            break;
        }

        auto refined = refine_targets(sol.plan, fam);
        if (plan_cost(refined) > plan_cost(sol.plan) + 1e-9) {
            out.fail("trial " + std::to_string(trial) + " refine_targets increased cost");
            break;
        }
    }
    return out;
}

Outcome criterion_7() {
    Outcome out{"measure-flattening maps verified on 100 densities + closed form"};
    const PiecewiseConstantDensity uniform = PiecewiseConstantDensity::uniform();
    std::mt19937_64 rng(107);
    for (int trial = 0; trial < 100; ++trial) {
        auto nu = random_density(rng, 0.1, 2.5);
        auto map = lyapunov_transform(nu);
        const double leb = kolmogorov_distance(pushforward_cdf(map, uniform, 10000), uniform);
        const double pushed = kolmogorov_distance(pushforward_cdf(map, nu, 10000), uniform);
        if (leb > 1e-6 || pushed > 1e-6) {
            out.fail("trial " + std::to_string(trial) + " pushforward distance " +
                     std::to_string(std::max(leb, pushed)));
            break;
        }
    }
    // density 2 on [0, 0.5]: T(x) = 2x below 0.5 and 2x - 1 above
    PiecewiseConstantDensity half{{0.0, 0.5, 1.0}, {2.0, 0.0}};
    auto map = lyapunov_transform(half);
    for (double x : {0.1, 0.25, 0.49, 0.51, 0.75, 0.9}) {
        const double want = x < 0.5 ? 2.0 * x : 2.0 * x - 1.0;
        if (std::abs(map(x) - want) > 1e-12) {
            out.fail("closed-form map differs at x = " + std::to_string(x));
            break;
        }
    }
    return out;
}

Outcome criterion_8() {
    Outcome out{"level splits hit every measure's integral to 1e-7, 100 pairs"};
    std::mt19937_64 rng(108);
    std::uniform_int_distribution<std::size_t> nn(1, 3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<PiecewiseConstantDensity> family;
        const std::size_t n = nn(rng);
        for (std::size_t i = 0; i < n; ++i) family.push_back(random_density(rng));
        PiecewiseConstantDensity g = random_density(rng, 0.0, 1.0);
        for (auto& v : g.values) v = std::min(1.0, std::max(0.0, v));  // keep g in [0,1]
        auto E = lyapunov_split(family, g);
        for (std::size_t i = 0; i < n; ++i) {
            const double got = measure_of(family[i], E);
            const double want = integral_against(family[i], g);
            if (std::abs(got - want) > 1e-7) {
                out.fail("trial " + std::to_string(trial) + " measure " + std::to_string(i) +
                         " off by " + std::to_string(got - want));
                return out;
            }
        }
    }
    return out;
}

Outcome criterion_9() {
    Outcome out{"certified approximate maps at eps 0.05 and 0.01, 10 instances"};
    std::mt19937_64 rng(109);
    std::uniform_int_distribution<std::size_t> nn(2, 3);
    double worst_time = 0.0;
    for (int trial = 0; trial < 10 && out.pass; ++trial) {
        std::vector<PiecewiseConstantDensity> family;
        const std::size_t n = nn(rng);
        for (std::size_t i = 0; i < n; ++i) family.push_back(random_density(rng));
        const PiecewiseConstantDensity nu = PiecewiseConstantDensity::uniform();
        for (double eps : {0.05, 0.01}) {
            const auto t0 = Clock::now();
            auto res = monge_approx(family, nu, eps);
            const double dt = seconds_since(t0);
            worst_time = std::max(worst_time, dt);
            if (dt >= 60.0) {
                out.fail("trial " + std::to_string(trial) + " took " + std::to_string(dt) + " s");
                break;
            }
            // lower_bound <= optimal plan cost <= map cost, so the certified
            // excess over any plan is bounded by the same budget
            const double gap = res.map_cost - res.lower_bound;
            if (gap < -1e-12 || gap > eps + res.slack + 1e-9) {
                out.fail("trial " + std::to_string(trial) + " gap " + std::to_string(gap) +
                         " outside [0, eps + slack]");
                break;
            }
            if (res.map_cost - res.plan_cost > eps + 1e-9) {
                out.fail("trial " + std::to_string(trial) + " map exceeds plan by more than eps");
                break;
            }
            // the certified gap may not grow when the grid is doubled
            auto finer = monge_approx(family, nu, eps, 2 * res.uniform_cells);
            const double finer_gap = finer.map_cost - finer.lower_bound;
            if (finer_gap > gap + 1e-7) {
                out.fail("trial " + std::to_string(trial) + " gap grew under refinement: " +
                         std::to_string(gap) + " -> " + std::to_string(finer_gap));
                break;
            }
        }
    }
    if (out.pass) out.detail = "slowest instance " + std::to_string(worst_time).substr(0, 5) + " s";
    return out;
}

Outcome criterion_10() {
    Outcome out{"competitor, cycle, and potential audits on every solver output"};
    std::mt19937_64 rng(110);
    for (std::size_t p = 0; p < g_outputs.size(); ++p) {
        const auto& rec = g_outputs[p];
        auto reports = check_c_monotone(rec.plan, rec.family, 64, 4, 110 + p);
        for (const auto& rep : reports)
            if (!rep.pass) {
                out.fail("plan " + std::to_string(p) + " has a cheaper competitor (excess " +
                         std::to_string(rep.alpha_objective - rep.best_objective) + ")");
                return out;
            }
        auto regions = ratio_constancy_regions(rec.family);
        auto violations = check_cyclic_monotonicity(rec.plan, regions, 4);
        if (!violations.empty()) {
            out.fail("plan " + std::to_string(p) + " has a " +
                     std::to_string(violations.front().cycle.size()) + "-cycle violation");
            return out;
        }
    }

    // potential recovery agrees with the cycle scan on random supports
    std::uniform_int_distribution<std::size_t> dp(2, 4);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t P = dp(rng);
        std::vector<std::pair<Point, Point>> pairs;
        TransportPlan plan;
        std::vector<std::size_t> region;
        for (std::size_t q = 0; q < P; ++q) {
            pairs.emplace_back(Point{coord(rng)}, Point{coord(rng)});
            plan.source.push_back(pairs.back().first);
            plan.target.push_back(pairs.back().second);
            region.push_back(q);
        }
        plan.matrix.assign(P * P, 0.0);
        for (std::size_t q = 0; q < P; ++q) plan.at(q, q) = 1.0 / static_cast<double>(P);
        const bool cycle_free =
            check_cyclic_monotonicity(plan, {region}, std::min<std::size_t>(P, 6)).empty();
        const bool recoverable = recover_potential(pairs).has_value();
        if (cycle_free != recoverable) {
            out.fail("support trial " + std::to_string(trial) +
                     ": potential recovery and cycle scan disagree");
            break;
        }
    }
    if (out.pass) out.detail = std::to_string(g_outputs.size()) + " plans audited";
    return out;
}

Outcome criterion_11() {
    Outcome out{"1D monotone structure and greedy mixing, 20 families"};
    std::mt19937_64 rng(111);
    for (int trial = 0; trial < 20; ++trial) {
        auto fam = random_family(rng, 1, 7, 3);
        auto sol = checked_solve_free(fam);

        auto graph = barycentric_function(sol.plan);
        std::sort(graph.begin(), graph.end(),
                  [](const auto& a, const auto& b) { return a.first[0] < b.first[0]; });
        for (std::size_t j = 1; j < graph.size(); ++j)
            if (graph[j].second[0] < graph[j - 1].second[0] - 1e-9) {
                out.fail("trial " + std::to_string(trial) + " barycentric function decreases");
                return out;
            }

        auto mm = monotone_mixing_1d(fam);
        if (!mm.fell_back && std::abs(mm.cost - sol.cost) > 1e-6) {
            out.fail("trial " + std::to_string(trial) +
                     " silent mismatch: greedy cost differs by " +
                     std::to_string(mm.cost - sol.cost) + " without reporting a stall");
            return out;
        }
        if (mm.fell_back && mm.reason.empty()) {
            out.fail("trial " + std::to_string(trial) + " stall reported without a reason");
            return out;
        }
    }
    return out;
}

}  // namespace

int main() {
    std::vector<Outcome> results;
    results.push_back(criterion_1());
    // criteria 3-9 and 11 run before 2 and 10 are evaluated, because those two
    // audit every solve the suite performed
    Outcome c3 = criterion_3();
    Outcome c4 = criterion_4();
    Outcome c5 = criterion_5();
    Outcome c6 = criterion_6();
    Outcome c7 = criterion_7();
    Outcome c8 = criterion_8();
    Outcome c9 = criterion_9();
    Outcome c11 = criterion_11();
    results.push_back(criterion_2());
    results.push_back(std::move(c3));
    results.push_back(std::move(c4));
    results.push_back(std::move(c5));
    results.push_back(std::move(c6));
    results.push_back(std::move(c7));
    results.push_back(std::move(c8));
    results.push_back(std::move(c9));
    results.push_back(criterion_10());
    results.push_back(std::move(c11));

    bool all = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        std::printf("criterion %2zu [%s]: %s%s%s\n", i + 1, r.name.c_str(),
                    r.pass ? "PASS" : "FAIL", r.detail.empty() ? "" : " — ",
                    r.detail.c_str());
        all = all && r.pass;
    }
    return all ? 0 : 1;
}
