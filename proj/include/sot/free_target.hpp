#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

#include "sot/lp.hpp"
#include "sot/measure.hpp"

namespace sot {

/// Image of the support under psi(x) = (1/n)(r_1(x), ..., r_n(x)), together
/// with the pushforward of the mean measure. All image points lie in the
/// probability simplex and average to its center.
struct SimplexEmbedding {
    std::vector<std::vector<double>> points;  // m x n
    std::vector<double> weights;              // m (mean measure)
    std::size_t n = 0;

    std::vector<double> center() const {
        return std::vector<double>(n, 1.0 / static_cast<double>(n));
    }
};

/// A minimal support subset whose psi-images' convex hull contains the
/// simplex center; its barycenter is a candidate target atom.
struct MixingCandidate {
    std::vector<std::size_t> indices;
    std::vector<double> weights;  // convex, strictly positive
    Point barycenter;
    double local_cost = 0.0;  // sum_k w_k ||x_k - barycenter||^2
    std::uint64_t mask = 0;
};

struct EnumerationOptions {
    std::size_t max_size = 0;     // 0 => family.n()
    std::size_t support_cap = 40;
    std::size_t measure_cap = 6;
    unsigned threads = 1;
};

inline SimplexEmbedding simplex_embed(const MeasureFamily& family, const Tolerances& tol = {}) {
    SimplexEmbedding emb;
    emb.n = family.n();
    emb.weights = family.mean_weights;
    emb.points.assign(family.m(), std::vector<double>(emb.n));
    for (std::size_t k = 0; k < family.m(); ++k)
        for (std::size_t i = 0; i < emb.n; ++i)
            emb.points[k][i] = family.ratios[i][k] / static_cast<double>(emb.n);
    // barycenter identity: sum_k mean_k psi(x_k) = (1/n, ..., 1/n)
    for (std::size_t i = 0; i < emb.n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < family.m(); ++k) s += emb.weights[k] * emb.points[k][i];
        if (std::abs(s - 1.0 / static_cast<double>(emb.n)) > tol.feas)
            throw BarycenterIdentityViolatedError("simplex embedding fails the center identity");
    }
    return emb;
}

namespace detail {

/// Convex-combination weights hitting the center, or empty when the center
/// is not in the hull (within tol.hull). For degenerate subsets the
/// lexicographically-least basic solution is chosen.
inline std::vector<double> hull_weights(const SimplexEmbedding& emb,
                                        const std::vector<std::size_t>& subset,
                                        const Tolerances& tol) {
    const std::size_t s = subset.size(), n = emb.n;
    const double center = 1.0 / static_cast<double>(n);

    // membership: min sum(u+v) s.t. sum w psi + u - v = center, sum w = 1
    {
        LinearProgram lp;
        lp.cols = s + 2 * n;
        lp.rows = n + 1;
        lp.objective.assign(lp.cols, 0.0);
        for (std::size_t i = 0; i < 2 * n; ++i) lp.objective[s + i] = 1.0;
        lp.A.assign(lp.rows * lp.cols, 0.0);
        lp.b.assign(lp.rows, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t a = 0; a < s; ++a) lp.at(i, a) = emb.points[subset[a]][i];
            lp.at(i, s + i) = 1.0;
            lp.at(i, s + n + i) = -1.0;
            lp.b[i] = center;
        }
        for (std::size_t a = 0; a < s; ++a) lp.at(n, a) = 1.0;
        lp.b[n] = 1.0;
        auto sol = solve(lp);
        if (sol.status != LPStatus::Optimal || sol.objective > tol.hull) return {};
    }

    // lexicographically-least weights: minimize w_0, pin it, then w_1, ...
    std::vector<double> fixed;
    for (std::size_t t = 0; t < s; ++t) {
        LinearProgram lp;
        lp.cols = s;
        lp.rows = n + 1 + t;
        lp.objective.assign(s, 0.0);
        lp.objective[t] = 1.0;
        lp.A.assign(lp.rows * lp.cols, 0.0);
        lp.b.assign(lp.rows, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t a = 0; a < s; ++a) lp.at(i, a) = emb.points[subset[a]][i];
            lp.b[i] = center;
        }
        for (std::size_t a = 0; a < s; ++a) lp.at(n, a) = 1.0;
        lp.b[n] = 1.0;
        for (std::size_t a = 0; a < t; ++a) {
            lp.at(n + 1 + a, a) = 1.0;
            lp.b[n + 1 + a] = fixed[a];
        }
        auto sol = solve(lp);
        if (sol.status != LPStatus::Optimal) return {};  // tolerance edge: treat as outside
        fixed.push_back(std::max(0.0, sol.objective));
        if (t + 1 == s) {
            std::vector<double> w = sol.primal;
            for (auto& v : w) v = std::max(0.0, v);
            return w;
        }
    }
    return {};
}

inline MixingCandidate make_candidate(const MeasureFamily& family,
                                      const std::vector<std::size_t>& subset,
                                      std::vector<double> weights, std::uint64_t mask) {
    MixingCandidate c;
    c.indices = subset;
    c.weights = std::move(weights);
    c.mask = mask;
    const std::size_t d = family.dim();
    c.barycenter.assign(d, 0.0);
    for (std::size_t a = 0; a < subset.size(); ++a)
        for (std::size_t t = 0; t < d; ++t)
            c.barycenter[t] += c.weights[a] * family.support[subset[a]][t];
    c.local_cost = 0.0;
    for (std::size_t a = 0; a < subset.size(); ++a)
        c.local_cost += c.weights[a] * sq_dist(family.support[subset[a]], c.barycenter);
    return c;
}

}  // namespace detail

/// All inclusion-minimal subsets of size <= max_size whose psi-images
/// contain the simplex center in their convex hull. Minimality is enforced
/// by size-ordered enumeration: a subset containing an accepted candidate
/// is skipped before any LP runs.
inline std::vector<MixingCandidate> enumerate_minimal_subsets(const MeasureFamily& family,
                                                              const SimplexEmbedding& emb,
                                                              const EnumerationOptions& opts = {},
                                                              const Tolerances& tol = {}) {
    const std::size_t m = family.m(), n = family.n();
    if (m > opts.support_cap || n > opts.measure_cap)
        throw EnumerationCapExceededError("enumeration caps exceeded (support or measure count)");
    const std::size_t max_size = std::min(opts.max_size == 0 ? n : opts.max_size, m);
    const double center = 1.0 / static_cast<double>(n);

    std::vector<MixingCandidate> candidates;
    for (std::size_t size = 1; size <= max_size; ++size) {
        // collect surviving subsets of this size first, then evaluate
        std::vector<std::vector<std::size_t>> pending;
        std::vector<std::size_t> comb(size);
        for (std::size_t i = 0; i < size; ++i) comb[i] = i;
        for (;;) {
            std::uint64_t mask = 0;
            for (auto idx : comb) mask |= std::uint64_t(1) << idx;
            bool skip = false;
            for (const auto& c : candidates)
                if ((c.mask & mask) == c.mask) { skip = true; break; }
            if (!skip) {
                // center must lie in the bounding box of the psi-images
                for (std::size_t i = 0; i < n && !skip; ++i) {
                    double lo = 1.0, hi = 0.0;
                    for (auto idx : comb) {
                        lo = std::min(lo, emb.points[idx][i]);
                        hi = std::max(hi, emb.points[idx][i]);
                    }
                    if (center < lo - tol.hull || center > hi + tol.hull) skip = true;
                }
            }
            if (!skip) pending.push_back(comb);
            std::size_t k = size;
            while (k > 0 && comb[k - 1] == m - size + (k - 1)) --k;
            if (k == 0) break;
            ++comb[k - 1];
            for (std::size_t i = k; i < size; ++i) comb[i] = comb[i - 1] + 1;
        }

        std::vector<std::vector<double>> weights(pending.size());
        const unsigned threads = std::max(1u, opts.threads);
        if (threads == 1 || pending.size() < 32) {
            for (std::size_t p = 0; p < pending.size(); ++p)
                weights[p] = detail::hull_weights(emb, pending[p], tol);
        } else {
            std::vector<std::thread> pool;
            std::size_t chunk = (pending.size() + threads - 1) / threads;
            for (unsigned t = 0; t < threads; ++t) {
                std::size_t lo = t * chunk, hi = std::min(pending.size(), lo + chunk);
                if (lo >= hi) break;
                pool.emplace_back([&, lo, hi] {
                    for (std::size_t p = lo; p < hi; ++p)
                        weights[p] = detail::hull_weights(emb, pending[p], tol);
                });
            }
            for (auto& th : pool) th.join();
        }
        for (std::size_t p = 0; p < pending.size(); ++p) {
            if (weights[p].empty()) continue;
            std::uint64_t mask = 0;
            for (auto idx : pending[p]) mask |= std::uint64_t(1) << idx;
            candidates.push_back(
                detail::make_candidate(family, pending[p], std::move(weights[p]), mask));
        }
    }
    if (candidates.empty())
        throw NoCandidateError("no mixing candidate found; the center identity rules this out");
    return candidates;
}

struct FreeSolution {
    DiscreteMeasure target;
    TransportPlan plan;
    double cost = 0.0;
    std::vector<MixingCandidate> candidates;
    std::vector<double> candidate_mass;  // aligned with `candidates`
};

/// Reduced free-marginal problem: route mass through mixing candidates so
/// that the source marginal is the mean measure, at minimal local cost.
inline FreeSolution solve_free(const MeasureFamily& family, const EnumerationOptions& opts = {},
                               const Tolerances& tol = {}) {
    auto emb = simplex_embed(family, tol);
    auto candidates = enumerate_minimal_subsets(family, emb, opts, tol);
    const std::size_t m = family.m(), nc = candidates.size();

    LinearProgram lp;
    lp.cols = nc;
    lp.rows = m;
    lp.objective.resize(nc);
    lp.A.assign(m * nc, 0.0);
    lp.b = family.mean_weights;
    for (std::size_t c = 0; c < nc; ++c) {
        lp.objective[c] = candidates[c].local_cost;
        for (std::size_t a = 0; a < candidates[c].indices.size(); ++a)
            lp.at(candidates[c].indices[a], c) = candidates[c].weights[a];
    }
    auto sol = solve(lp);
    if (sol.status != LPStatus::Optimal)
        throw InternalInfeasibleError("reduced free-target LP has no optimum");

    FreeSolution out;
    out.candidates = candidates;
    out.candidate_mass = sol.primal;
    out.cost = sol.objective;

    // assemble plan columns, merging coincident barycenters
    std::vector<std::size_t> col_of(nc, 0);
    std::vector<Point> targets;
    for (std::size_t c = 0; c < nc; ++c) {
        if (sol.primal[c] <= 0.0) continue;
        std::size_t found = targets.size();
        for (std::size_t t = 0; t < targets.size(); ++t)
            if (inf_dist(targets[t], candidates[c].barycenter) <= tol.geom) { found = t; break; }
        if (found == targets.size()) targets.push_back(candidates[c].barycenter);
        col_of[c] = found;
    }
    out.plan.source = family.support;
    out.plan.target = targets;
    out.plan.matrix.assign(m * targets.size(), 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
        if (sol.primal[c] <= 0.0) continue;
        for (std::size_t a = 0; a < candidates[c].indices.size(); ++a)
            out.plan.at(candidates[c].indices[a], col_of[c]) +=
                sol.primal[c] * candidates[c].weights[a];
    }
    out.target.points = targets;
    out.target.weights = out.plan.col_sums();
    out.plan.cached_cost = out.cost;

    auto rep = check_plan(out.plan, family, FreeTarget{}, tol);
    if (!rep.feasible) throw InternalInfeasibleError("free-target plan fails feasibility check");
    return out;
}

/// Moves every target atom to the barycenter of its conditional; never
/// increases squared-Euclidean cost and leaves the conditionals (hence the
/// mixing constraints) untouched.
inline TransportPlan refine_targets(const TransportPlan& plan, const MeasureFamily& family,
                                    const Tolerances& tol = {}) {
    const std::size_t d = family.dim();
    std::vector<Point> bary;
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < plan.cols(); ++j) {
        double mass = 0.0;
        Point g(d, 0.0);
        for (std::size_t k = 0; k < plan.rows(); ++k) {
            mass += plan.at(k, j);
            for (std::size_t t = 0; t < d; ++t) g[t] += plan.at(k, j) * plan.source[k][t];
        }
        if (mass <= 0.0) continue;
        for (std::size_t t = 0; t < d; ++t) g[t] /= mass;
        bary.push_back(std::move(g));
        keep.push_back(j);
    }
    // merge coincident barycenters
    std::vector<Point> targets;
    std::vector<std::size_t> col_of(keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a) {
        std::size_t found = targets.size();
        for (std::size_t t = 0; t < targets.size(); ++t)
            if (inf_dist(targets[t], bary[a]) <= tol.geom) { found = t; break; }
        if (found == targets.size()) targets.push_back(bary[a]);
        col_of[a] = found;
    }
    TransportPlan out;
    out.source = plan.source;
    out.target = targets;
    out.matrix.assign(plan.rows() * targets.size(), 0.0);
    for (std::size_t a = 0; a < keep.size(); ++a)
        for (std::size_t k = 0; k < plan.rows(); ++k)
            out.at(k, col_of[a]) += plan.at(k, keep[a]);
    return out;
}

}  // namespace sot
