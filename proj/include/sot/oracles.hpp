#pragma once

#include <optional>
#include <random>
#include <vector>

#include "sot/fixed_target.hpp"
#include "sot/lp.hpp"
#include "sot/measure.hpp"

namespace sot {

struct PlanEntry {
    std::size_t source = 0, target = 0;
    double mass = 0.0;
};

/// One sampled finite sub-measure alpha and the outcome of the competitor
/// LP: pass means alpha is no costlier than any measure on its grid with the
/// same r_i-weighted marginals.
struct CompetitorReport {
    std::vector<PlanEntry> alpha;
    double alpha_objective = 0.0;
    double best_objective = 0.0;
    bool pass = false;
    std::vector<PlanEntry> witness;  // cheaper competitor, filled on fail
};

/// Samples finite pieces of the plan support and checks each against the
/// best competitor with matching r_i-weighted marginals (solved as an LP:
/// the competitor class is a polytope, not a permutation set).
inline std::vector<CompetitorReport> check_c_monotone(const TransportPlan& plan,
                                                      const MeasureFamily& family,
                                                      std::size_t samples = 64,
                                                      std::size_t support_size = 4,
                                                      std::uint64_t seed = 1,
                                                      const CostSpec& cost = {},
                                                      const Tolerances& tol = {}) {
    if (support_size > 8) throw TooLargeError("competitor sampling caps support_size at 8");
    std::vector<PlanEntry> support;
    for (std::size_t k = 0; k < plan.rows(); ++k)
        for (std::size_t j = 0; j < plan.cols(); ++j)
            if (plan.at(k, j) > 1e-12) support.push_back({k, j, plan.at(k, j)});
    if (support.empty()) throw EmptySupportError("plan has empty support");

    std::mt19937_64 rng(seed);
    std::vector<CompetitorReport> reports;
    reports.reserve(samples);
    const std::size_t n = family.n();
    for (std::size_t s = 0; s < samples; ++s) {
        // sample without replacement
        std::vector<std::size_t> idx(support.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        const std::size_t take = std::min(support_size, support.size());
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        CompetitorReport rep;
        for (std::size_t i = 0; i < take; ++i) rep.alpha.push_back(support[idx[i]]);

        std::vector<std::size_t> srcs, tgts;
        for (const auto& e : rep.alpha) {
            if (std::find(srcs.begin(), srcs.end(), e.source) == srcs.end())
                srcs.push_back(e.source);
            if (std::find(tgts.begin(), tgts.end(), e.target) == tgts.end())
                tgts.push_back(e.target);
        }
        const std::size_t K = srcs.size(), J = tgts.size();

        auto cost_at = [&](std::size_t a, std::size_t b) {
            return cost.value(plan.source[srcs[a]], plan.target[tgts[b]], srcs[a], tgts[b]);
        };
        rep.alpha_objective = 0.0;
        std::vector<double> alpha_grid(K * J, 0.0);
        for (const auto& e : rep.alpha) {
            const std::size_t a = std::find(srcs.begin(), srcs.end(), e.source) - srcs.begin();
            const std::size_t b = std::find(tgts.begin(), tgts.end(), e.target) - tgts.begin();
            alpha_grid[a * J + b] += e.mass;
            rep.alpha_objective += e.mass * cost_at(a, b);
        }

        LinearProgram lp;
        lp.cols = K * J;
        lp.rows = K + n * J;
        lp.objective.resize(lp.cols);
        for (std::size_t a = 0; a < K; ++a)
            for (std::size_t b = 0; b < J; ++b) lp.objective[a * J + b] = cost_at(a, b);
        lp.A.assign(lp.rows * lp.cols, 0.0);
        lp.b.assign(lp.rows, 0.0);
        for (std::size_t a = 0; a < K; ++a) {
            double rowmass = 0.0;
            for (std::size_t b = 0; b < J; ++b) {
                lp.at(a, a * J + b) = 1.0;
                rowmass += alpha_grid[a * J + b];
            }
            lp.b[a] = rowmass;
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t b = 0; b < J; ++b) {
                const std::size_t row = K + i * J + b;
                double rhs = 0.0;
                for (std::size_t a = 0; a < K; ++a) {
                    const double r = family.ratios[i][srcs[a]];
                    lp.at(row, a * J + b) = r;
                    rhs += r * alpha_grid[a * J + b];
                }
                lp.b[row] = rhs;
            }
        auto sol = solve(lp);
        if (sol.status != LPStatus::Optimal)
            throw InternalInfeasibleError("competitor LP must be feasible (alpha itself is)");
        rep.best_objective = sol.objective;
        rep.pass = rep.alpha_objective <= rep.best_objective + tol.cmp;
        if (!rep.pass)
            for (std::size_t a = 0; a < K; ++a)
                for (std::size_t b = 0; b < J; ++b)
                    if (sol.primal[a * J + b] > 1e-12)
                        rep.witness.push_back({srcs[a], tgts[b], sol.primal[a * J + b]});
        reports.push_back(std::move(rep));
    }
    return reports;
}

struct CycleViolation {
    std::size_t region = 0;
    std::vector<std::size_t> cycle;  // indices into the region's support pairs
    double slack = 0.0;              // cost decrease achieved by the swap
};

/// Support pairs of the plan restricted to one constancy region.
inline std::vector<std::pair<Point, Point>> region_support(const TransportPlan& plan,
                                                           const std::vector<std::size_t>& region) {
    std::vector<std::pair<Point, Point>> pairs;
    for (std::size_t k : region)
        for (std::size_t j = 0; j < plan.cols(); ++j)
            if (plan.at(k, j) > 1e-12) pairs.emplace_back(plan.source[k], plan.target[j]);
    return pairs;
}

namespace detail {

inline double cycle_slack(const std::vector<std::pair<Point, Point>>& pairs,
                          const std::vector<std::size_t>& cyc) {
    double straight = 0.0, shifted = 0.0;
    const std::size_t L = cyc.size();
    for (std::size_t i = 0; i < L; ++i) {
        straight += sq_dist(pairs[cyc[i]].first, pairs[cyc[i]].second);
        shifted += sq_dist(pairs[cyc[(i + 1) % L]].first, pairs[cyc[i]].second);
    }
    return straight - shifted;  // > 0 => violation
}

inline void cycles_rec(const std::vector<std::pair<Point, Point>>& pairs, std::size_t region_id,
                       std::vector<std::size_t>& cyc, std::vector<bool>& used,
                       std::size_t max_len, double tol_cmp,
                       std::vector<CycleViolation>& out) {
    if (cyc.size() >= 2) {
        const double slack = cycle_slack(pairs, cyc);
        if (slack > tol_cmp) out.push_back({region_id, cyc, slack});
    }
    if (cyc.size() == max_len) return;
    // keep the first element minimal to avoid re-listing rotations
    for (std::size_t p = cyc.front() + 1; p < pairs.size(); ++p) {
        if (used[p]) continue;
        used[p] = true;
        cyc.push_back(p);
        cycles_rec(pairs, region_id, cyc, used, max_len, tol_cmp, out);
        cyc.pop_back();
        used[p] = false;
    }
}

}  // namespace detail

/// Lists every cycle of length <= max_cycle (within a constancy region)
/// whose pair swap strictly lowers the squared-Euclidean cost.
inline std::vector<CycleViolation> check_cyclic_monotonicity(
    const TransportPlan& plan, const std::vector<std::vector<std::size_t>>& regions,
    std::size_t max_cycle = 4, const Tolerances& tol = {}) {
    if (max_cycle > 6) throw TooLargeError("cycle enumeration caps max_cycle at 6");
    std::vector<CycleViolation> out;
    for (std::size_t r = 0; r < regions.size(); ++r) {
        auto pairs = region_support(plan, regions[r]);
        std::vector<bool> used(pairs.size(), false);
        for (std::size_t first = 0; first < pairs.size(); ++first) {
            std::vector<std::size_t> cyc{first};
            used[first] = true;
            detail::cycles_rec(pairs, r, cyc, used, max_cycle, tol.cmp, out);
            used[first] = false;
        }
    }
    return out;
}

/// Convex-potential recovery on support pairs of one region: the subgradient
/// system phi_b >= phi_a + <y_a, x_b - x_a> is solved as shortest paths on
/// edge weights <y_a, x_a - x_b> (for psi = -phi the system reads
/// psi_b <= psi_a + weight). Returns nullopt exactly when a negative cycle
/// (a cyclic-monotonicity violation) exists.
inline std::optional<std::vector<double>> recover_potential(
    const std::vector<std::pair<Point, Point>>& pairs, const Tolerances& tol = {}) {
    const std::size_t V = pairs.size();
    if (V == 0) return std::vector<double>{};
    auto weight = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t t = 0; t < pairs[a].first.size(); ++t)
            s += pairs[a].second[t] * (pairs[a].first[t] - pairs[b].first[t]);
        return s;
    };
    std::vector<double> phi(V, 0.0);  // virtual source gives every node 0
    for (std::size_t iter = 0; iter < V; ++iter) {
        bool changed = false;
        for (std::size_t a = 0; a < V; ++a)
            for (std::size_t b = 0; b < V; ++b) {
                if (a == b) continue;
                const double cand = phi[a] + weight(a, b);
                if (cand < phi[b] - 1e-15) {
                    phi[b] = cand;
                    changed = true;
                }
            }
        if (!changed) return phi;
    }
    // one more relaxation round decides feasibility within tolerance
    for (std::size_t a = 0; a < V; ++a)
        for (std::size_t b = 0; b < V; ++b) {
            if (a == b) continue;
            if (phi[a] + weight(a, b) < phi[b] - tol.cmp) return std::nullopt;
        }
    return phi;
}

struct BruteForceResult {
    double cost = 0.0;
    DiscreteMeasure target;
    TransportPlan plan;
};

/// Ground truth for the free-marginal problem on an explicit target grid:
/// the full LP with free columns, solved exhaustively.
inline BruteForceResult brute_force_free_target(const MeasureFamily& family,
                                                const std::vector<Point>& grid,
                                                std::size_t variable_cap = 60000,
                                                const Tolerances& tol = {}) {
    const std::size_t m = family.m(), l = grid.size(), n = family.n();
    if (m * l > variable_cap) throw TooLargeError("grid x support exceeds the LP cap");
    LinearProgram lp;
    lp.cols = m * l;
    lp.rows = m + (n - 1) * l;
    lp.objective.resize(lp.cols);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t j = 0; j < l; ++j)
            lp.objective[k * l + j] = sq_dist(family.support[k], grid[j]);
    lp.A.assign(lp.rows * lp.cols, 0.0);
    lp.b.assign(lp.rows, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t j = 0; j < l; ++j) lp.at(k, k * l + j) = 1.0;
        lp.b[k] = family.mean_weights[k];
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = 0; j < l; ++j) {
            const std::size_t row = m + i * l + j;
            for (std::size_t k = 0; k < m; ++k) {
                const double coef = family.ratios[i][k] - 1.0;
                if (coef != 0.0) lp.at(row, k * l + j) = coef;
            }
        }
    auto sol = solve(lp);
    if (sol.status != LPStatus::Optimal)
        throw InternalInfeasibleError("free-marginal grid LP has no optimum");
    BruteForceResult out;
    out.cost = sol.objective;
    // keep only columns carrying mass
    std::vector<std::size_t> keep;
    std::vector<double> colmass(l, 0.0);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t j = 0; j < l; ++j) colmass[j] += sol.primal[k * l + j];
    for (std::size_t j = 0; j < l; ++j)
        if (colmass[j] > 1e-12) keep.push_back(j);
    out.plan.source = family.support;
    for (std::size_t j : keep) {
        out.plan.target.push_back(grid[j]);
        out.target.points.push_back(grid[j]);
        out.target.weights.push_back(colmass[j]);
    }
    out.plan.matrix.assign(m * keep.size(), 0.0);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t a = 0; a < keep.size(); ++a)
            out.plan.at(k, a) = sol.primal[k * l + keep[a]];
    out.plan.cached_cost = out.cost;
    (void)tol;
    return out;
}

}  // namespace sot
