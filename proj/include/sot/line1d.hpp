#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sot/fixed_target.hpp"
#include "sot/free_target.hpp"
#include "sot/measure.hpp"

namespace sot {

/// Nonnegative piecewise-constant density on an interval:
/// values[i] on [breakpoints[i], breakpoints[i+1]).
struct PiecewiseConstantDensity {
    std::vector<double> breakpoints;  // K+1, strictly increasing
    std::vector<double> values;       // K, >= 0

    std::size_t cells() const { return values.size(); }

    double mass() const {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            s += values[i] * (breakpoints[i + 1] - breakpoints[i]);
        return s;
    }

    PiecewiseConstantDensity normalized() const {
        PiecewiseConstantDensity out = *this;
        const double m = mass();
        if (m <= 0.0) throw BadRangeError("cannot normalize a zero density");
        for (auto& v : out.values) v /= m;
        return out;
    }

    static PiecewiseConstantDensity uniform(double lo = 0.0, double hi = 1.0) {
        return {{lo, hi}, {1.0 / (hi - lo)}};
    }
};

/// Monotone-lookup CDF of a piecewise-constant density.
class DensityCdf {
  public:
    explicit DensityCdf(const PiecewiseConstantDensity& d) : d_(&d) {
        cum_.assign(d.cells() + 1, 0.0);
        for (std::size_t i = 0; i < d.cells(); ++i)
            cum_[i + 1] = cum_[i] + d.values[i] * (d.breakpoints[i + 1] - d.breakpoints[i]);
    }

    double operator()(double x) const {
        const auto& b = d_->breakpoints;
        if (x <= b.front()) return 0.0;
        if (x >= b.back()) return cum_.back();
        auto it = std::upper_bound(b.begin(), b.end(), x);
        std::size_t i = static_cast<std::size_t>(it - b.begin()) - 1;
        return cum_[i] + d_->values[i] * (x - b[i]);
    }

    double integral(double a, double b) const {
        if (b <= a) return 0.0;
        return (*this)(b) - (*this)(a);
    }

    double total() const { return cum_.back(); }

  private:
    const PiecewiseConstantDensity* d_;
    std::vector<double> cum_;
};

struct AffinePiece {
    double lo = 0.0, hi = 0.0;  // source interval [lo, hi)
    double a = 1.0, b = 0.0;    // x -> a*x + b
    double operator()(double x) const { return a * x + b; }
};

/// Piecewise-affine map; pieces are disjoint and sorted by source interval.
struct PiecewiseMap {
    std::vector<AffinePiece> pieces;

    static PiecewiseMap identity(double lo = 0.0, double hi = 1.0) {
        return {{{lo, hi, 1.0, 0.0}}};
    }

    double operator()(double x) const {
        for (const auto& p : pieces)
            if (x >= p.lo && x < p.hi) return p(x);
        if (!pieces.empty() && x == pieces.back().hi) return pieces.back()(x);
        throw BadRangeError("point outside map domain");
    }
};

namespace detail {

inline std::vector<double> merge_breakpoints(const std::vector<const PiecewiseConstantDensity*>& ds,
                                             double tol_geom = 1e-12) {
    std::vector<double> bp;
    for (const auto* d : ds) bp.insert(bp.end(), d->breakpoints.begin(), d->breakpoints.end());
    std::sort(bp.begin(), bp.end());
    std::vector<double> out;
    for (double x : bp)
        if (out.empty() || x - out.back() > tol_geom) out.push_back(x);
    return out;
}

inline double value_at(const PiecewiseConstantDensity& d, double x) {
    const auto& b = d.breakpoints;
    if (x < b.front() || x >= b.back()) return 0.0;
    auto it = std::upper_bound(b.begin(), b.end(), x);
    std::size_t i = static_cast<std::size_t>(it - b.begin());
    if (i == 0) return d.values[0];
    if (i > d.values.size()) return d.values.back();
    return d.values[i - 1];
}

}  // namespace detail

/// Lebesgue-preserving transform of [0,1] flattening nu to nu([0,1]) * lambda.
/// The excess and deficit regions of nu - lambda are paired level by level;
/// each paired class is sent to its accumulated Lebesgue coordinate, and the
/// neutral region is shifted behind them.
inline PiecewiseMap lyapunov_transform(const PiecewiseConstantDensity& nu_in,
                                       const Tolerances& tol = {}) {
    if (std::abs(nu_in.breakpoints.front()) > 1e-9 || std::abs(nu_in.breakpoints.back() - 1.0) > 1e-9)
        throw NotOnUnitIntervalError("lyapunov_transform expects a density on [0,1]");
    PiecewiseConstantDensity nu = nu_in.normalized();

    struct Cell {
        double x0, x1, rho;  // |density of nu - lambda|
    };
    std::vector<Cell> plus, minus, zero;
    const double cls = 1e-12;  // classification threshold for rho
    for (std::size_t i = 0; i < nu.cells(); ++i) {
        const double x0 = nu.breakpoints[i], x1 = nu.breakpoints[i + 1];
        const double rho = nu.values[i] - 1.0;
        if (rho > cls)
            plus.push_back({x0, x1, rho});
        else if (rho < -cls)
            minus.push_back({x0, x1, -rho});
        else
            zero.push_back({x0, x1, 0.0});
    }

    PiecewiseMap map;
    double r = 0.0;  // accumulated Lebesgue measure of the paired region
    std::size_t pi = 0, qi = 0;
    double xp = plus.empty() ? 0.0 : plus[0].x0;
    double xq = minus.empty() ? 0.0 : minus[0].x0;
    while (pi < plus.size() && qi < minus.size()) {
        const Cell& P = plus[pi];
        const Cell& Q = minus[qi];
        const double mp = (P.x1 - xp) * P.rho;
        const double mq = (Q.x1 - xq) * Q.rho;
        const double step = std::min(mp, mq);
        if (step <= 0.0) {
            if (mp <= 0.0 && ++pi < plus.size()) xp = plus[pi].x0;
            if (mq <= 0.0 && ++qi < minus.size()) xq = minus[qi].x0;
            continue;
        }
        const double dxp = step / P.rho;
        const double dxq = step / Q.rho;
        const double ap = 1.0 + P.rho / Q.rho;  // dr/dx on the excess side
        const double aq = 1.0 + Q.rho / P.rho;  // dr/dx on the deficit side
        map.pieces.push_back({xp, xp + dxp, ap, r - ap * xp});
        map.pieces.push_back({xq, xq + dxq, aq, r - aq * xq});
        r += step * (1.0 / P.rho + 1.0 / Q.rho);
        xp += dxp;
        xq += dxq;
        if (xp >= P.x1 - 1e-15 && ++pi < plus.size()) xp = plus[pi].x0;
        if (xq >= Q.x1 - 1e-15 && ++qi < minus.size()) xq = minus[qi].x0;
    }
    // Rounding can leave a sliver on one side; shift it in place so the map
    // still covers the domain.
    auto flush = [&](std::vector<Cell>& cells, std::size_t i, double x) {
        for (; i < cells.size(); ++i) {
            const double x0 = std::max(x, cells[i].x0), x1 = cells[i].x1;
            if (x1 - x0 <= 1e-15) continue;
            map.pieces.push_back({x0, x1, 1.0, r - x0});
            r += x1 - x0;
        }
    };
    flush(plus, pi, xp);
    flush(minus, qi, xq);
    for (const auto& z : zero) {
        map.pieces.push_back({z.x0, z.x1, 1.0, r - z.x0});
        r += z.x1 - z.x0;
    }
    std::sort(map.pieces.begin(), map.pieces.end(),
              [](const AffinePiece& a, const AffinePiece& b) { return a.lo < b.lo; });
    (void)tol;
    return map;
}

/// CDF of density∘map^{-1}, sampled at `resolution` points of [0,1].
/// Preimages of half-lines are computed exactly piece by piece.
inline std::vector<std::pair<double, double>> pushforward_cdf(const PiecewiseMap& map,
                                                              const PiecewiseConstantDensity& density,
                                                              std::size_t resolution = 10000) {
    if (resolution < 100) throw BadRangeError("resolution must be >= 100");
    DensityCdf F(density);
    std::vector<std::pair<double, double>> table;
    table.reserve(resolution);
    for (std::size_t s = 0; s < resolution; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(resolution - 1);
        double acc = 0.0;
        for (const auto& p : map.pieces) {
            if (p.a > 0.0) {
                const double xmax = (t - p.b) / p.a;
                if (xmax > p.lo) acc += F.integral(p.lo, std::min(p.hi, xmax));
            } else if (p.a < 0.0) {
                const double xmin = (t - p.b) / p.a;
                if (xmin < p.hi) acc += F.integral(std::max(p.lo, xmin), p.hi);
            } else if (p.b <= t) {
                acc += F.integral(p.lo, p.hi);
            }
        }
        table.emplace_back(t, acc);
    }
    return table;
}

/// Kolmogorov distance between a sampled CDF table and a reference density's CDF.
inline double kolmogorov_distance(const std::vector<std::pair<double, double>>& table,
                                  const PiecewiseConstantDensity& reference) {
    DensityCdf F(reference);
    double worst = 0.0;
    for (const auto& [t, v] : table) worst = std::max(worst, std::abs(v - F(t)));
    return worst;
}

using IntervalSet = std::vector<std::pair<double, double>>;

inline double measure_of(const PiecewiseConstantDensity& density, const IntervalSet& set) {
    DensityCdf F(density);
    double s = 0.0;
    for (const auto& [a, b] : set) s += F.integral(a, b);
    return s;
}

inline double integral_against(const PiecewiseConstantDensity& density,
                               const PiecewiseConstantDensity& g) {
    auto bp = detail::merge_breakpoints({&density, &g});
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        const double mid = 0.5 * (bp[i] + bp[i + 1]);
        s += detail::value_at(density, mid) * detail::value_at(g, mid) * (bp[i + 1] - bp[i]);
    }
    return s;
}

/// Constructive form of the Lyapunov range identity: a set E with
/// mu_i(E) = int g dmu_i for every i. On each common-refinement cell the
/// left sub-interval of relative length g is taken, which achieves equality
/// cell by cell.
inline IntervalSet lyapunov_split(const std::vector<PiecewiseConstantDensity>& family,
                                  const PiecewiseConstantDensity& g, const Tolerances& tol = {}) {
    std::vector<const PiecewiseConstantDensity*> all;
    for (const auto& d : family) all.push_back(&d);
    all.push_back(&g);
    auto bp = detail::merge_breakpoints(all, tol.geom);
    IntervalSet out;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        const double mid = 0.5 * (bp[i] + bp[i + 1]);
        double gv = detail::value_at(g, mid);
        if (gv < -1e-12 || gv > 1.0 + 1e-12)
            throw BadRangeError("g must take values in [0,1]");
        gv = std::clamp(gv, 0.0, 1.0);
        if (gv <= 0.0) continue;
        const double a = bp[i], b = a + gv * (bp[i + 1] - bp[i]);
        if (!out.empty() && std::abs(out.back().second - a) <= tol.geom)
            out.back().second = b;
        else
            out.emplace_back(a, b);
    }
    return out;
}

struct MongeApproxResult {
    PiecewiseMap map;
    double map_cost = 0.0;         // mean over measures of int c(x, T(x)) dmu_i
    std::vector<double> per_measure_cost;
    double plan_cost = 0.0;        // discrete optimum, midpoint costs
    double lower_bound = 0.0;      // discrete optimum, per-block minimal costs
    double epsilon = 0.0;
    double slack = 0.0;            // plan_cost - lower_bound
    std::size_t uniform_cells = 0; // uniform grid resolution actually used
    TransportPlan plan;            // the discrete plan the map was built from
    MeasureFamily discrete_family;
    DiscreteMeasure discrete_target;
};

namespace detail {

struct GridCell {
    double lo, hi;
};

inline std::vector<GridCell> build_cells(const std::vector<const PiecewiseConstantDensity*>& ds,
                                         std::size_t uniform_cells) {
    std::vector<double> bp;
    for (std::size_t i = 0; i <= uniform_cells; ++i)
        bp.push_back(static_cast<double>(i) / static_cast<double>(uniform_cells));
    for (const auto* d : ds) bp.insert(bp.end(), d->breakpoints.begin(), d->breakpoints.end());
    std::sort(bp.begin(), bp.end());
    std::vector<double> uniq;
    for (double x : bp)
        if (uniq.empty() || x - uniq.back() > 1e-12) uniq.push_back(x);
    std::vector<GridCell> cells;
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i) cells.push_back({uniq[i], uniq[i + 1]});
    return cells;
}

// Exact oscillation of (x-y)^2 over a source x target box.
inline double block_oscillation(double x0, double x1, double y0, double y1) {
    const double dlo = x0 - y1, dhi = x1 - y0;
    const double cmax = std::max(dlo * dlo, dhi * dhi);
    const double cmin = (dlo <= 0.0 && dhi >= 0.0) ? 0.0 : std::min(dlo * dlo, dhi * dhi);
    return cmax - cmin;
}

inline double block_min_cost(double x0, double x1, double y0, double y1) {
    const double dlo = x0 - y1, dhi = x1 - y0;
    return (dlo <= 0.0 && dhi >= 0.0) ? 0.0 : std::min(dlo * dlo, dhi * dhi);
}

}  // namespace detail

/// epsilon-approximate simultaneous Monge map on [0,1]: partitions source and
/// target into cells with cost oscillation <= epsilon, solves the discrete
/// problem on the cells, splits each source cell by the plan's conditional
/// probabilities, and maps each piece monotonically onto its target cell.
/// Every mu_i is pushed exactly onto nu; the cost exceeds the certified
/// discrete lower bound by at most epsilon + slack.
inline MongeApproxResult monge_approx(const std::vector<PiecewiseConstantDensity>& family_in,
                                      const PiecewiseConstantDensity& nu_in, double epsilon,
                                      std::size_t initial_cells = 0, const Tolerances& tol = {}) {
    if (epsilon <= 0.0) throw BadRangeError("epsilon must be positive");
    std::vector<PiecewiseConstantDensity> family;
    for (const auto& d : family_in) family.push_back(d.normalized());
    PiecewiseConstantDensity nu = nu_in.normalized();
    const std::size_t n = family.size();

    // start coarse; the oscillation check below drives the refinement, and
    // only mass-carrying blocks have to satisfy the budget
    std::size_t cells_n = initial_cells == 0 ? 8 : initial_cells;

    // support of the previous (coarser) solve, used to seed the working set
    // of the next level's column generation
    std::vector<std::pair<double, double>> prev_support;
    double prev_h = 1.0;

    for (int attempt = 0; attempt < 7; ++attempt, cells_n *= 2) {
        std::vector<const PiecewiseConstantDensity*> src_refs;
        for (const auto& d : family) src_refs.push_back(&d);
        auto src_cells = detail::build_cells(src_refs, cells_n);
        auto tgt_cells = detail::build_cells({&nu}, cells_n);

        // discretize sources onto cell midpoints
        std::vector<Point> src_points;
        std::vector<std::vector<double>> weight_vectors(n);
        std::vector<std::size_t> src_cell_of;  // retained family index -> cell index
        {
            std::vector<DensityCdf> cdfs;
            for (const auto& d : family) cdfs.emplace_back(d);
            for (std::size_t c = 0; c < src_cells.size(); ++c) {
                double mean = 0.0;
                std::vector<double> w(n);
                for (std::size_t i = 0; i < n; ++i) {
                    w[i] = cdfs[i].integral(src_cells[c].lo, src_cells[c].hi);
                    mean += w[i];
                }
                if (mean <= 0.0) continue;
                src_points.push_back({0.5 * (src_cells[c].lo + src_cells[c].hi)});
                for (std::size_t i = 0; i < n; ++i) weight_vectors[i].push_back(w[i]);
                src_cell_of.push_back(c);
            }
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (double v : weight_vectors[i]) s += v;
                for (auto& v : weight_vectors[i]) v /= s;  // quadrature renormalization
            }
        }
        auto fam = build_family(src_points, weight_vectors, tol);
        if (!fam.dropped.empty()) {
            // points dropped after renormalization; realign the cell mapping
            std::vector<std::size_t> remap;
            std::size_t di = 0;
            for (std::size_t k = 0; k < src_cell_of.size(); ++k) {
                if (di < fam.dropped.size() && fam.dropped[di] == k) { ++di; continue; }
                remap.push_back(src_cell_of[k]);
            }
            src_cell_of = std::move(remap);
        }

        // discretize target
        DiscreteMeasure target;
        std::vector<std::size_t> tgt_cell_of;
        {
            DensityCdf Fn(nu);
            for (std::size_t c = 0; c < tgt_cells.size(); ++c) {
                const double w = Fn.integral(tgt_cells[c].lo, tgt_cells[c].hi);
                if (w <= 0.0) continue;
                target.points.push_back({0.5 * (tgt_cells[c].lo + tgt_cells[c].hi)});
                target.weights.push_back(w);
                tgt_cell_of.push_back(c);
            }
            double s = target.total_mass();
            for (auto& w : target.weights) w /= s;
        }

        std::vector<double> cost(fam.m() * target.size());
        for (std::size_t k = 0; k < fam.m(); ++k)
            for (std::size_t j = 0; j < target.size(); ++j)
                cost[k * target.size() + j] = sq_dist(fam.support[k], target.points[j]);
        std::vector<std::size_t> seed;
        for (const auto& [xs, ys] : prev_support)
            for (std::size_t k = 0; k < fam.m(); ++k) {
                if (std::abs(fam.support[k][0] - xs) > prev_h) continue;
                for (std::size_t j = 0; j < target.size(); ++j)
                    if (std::abs(target.points[j][0] - ys) <= prev_h)
                        seed.push_back(k * target.size() + j);
            }
        auto lp_sol = detail::solve_sot_colgen(fam.m(), target.size(), n, fam.mean_weights,
                                               fam.ratios, target.weights, cost, seed);
        FixedSolution solved;
        solved.plan.source = fam.support;
        solved.plan.target = target.points;
        solved.plan.matrix = lp_sol.primal;
        solved.cost = lp_sol.objective;
        solved.plan.cached_cost = lp_sol.objective;
        if (!check_plan(solved.plan, fam, target, tol).feasible)
            throw InternalInfeasibleError("discrete transport plan fails feasibility check");

        // a-posteriori oscillation check over mass-carrying blocks
        double worst_osc = 0.0;
        for (std::size_t k = 0; k < fam.m(); ++k)
            for (std::size_t j = 0; j < target.size(); ++j) {
                if (solved.plan.at(k, j) <= 1e-15) continue;
                const auto& sc = src_cells[src_cell_of[k]];
                const auto& tc = tgt_cells[tgt_cell_of[j]];
                worst_osc = std::max(worst_osc,
                                     detail::block_oscillation(sc.lo, sc.hi, tc.lo, tc.hi));
            }
        if (worst_osc > epsilon) {
            if (attempt == 6)
                throw ResolutionTooCoarseError(
                    "cells cannot satisfy the cost-oscillation bound at this epsilon");
            prev_support.clear();
            for (std::size_t k = 0; k < fam.m(); ++k)
                for (std::size_t j = 0; j < target.size(); ++j)
                    if (solved.plan.at(k, j) > 1e-15)
                        prev_support.emplace_back(fam.support[k][0], target.points[j][0]);
            prev_h = 0.3 / static_cast<double>(cells_n);
            continue;
        }

        // certified lower bound: same polytope, per-block minimal costs.
        // Seeding the working set with the plan's support keeps the bound
        // below the plan's own block-minimum cost, hence below the map cost.
        double lower = 0.0;
        {
            std::vector<double> cmin(fam.m() * target.size());
            std::vector<std::size_t> seed;
            for (std::size_t k = 0; k < fam.m(); ++k)
                for (std::size_t j = 0; j < target.size(); ++j) {
                    const auto& sc = src_cells[src_cell_of[k]];
                    const auto& tc = tgt_cells[tgt_cell_of[j]];
                    cmin[k * target.size() + j] =
                        detail::block_min_cost(sc.lo, sc.hi, tc.lo, tc.hi);
                    if (solved.plan.at(k, j) > 0.0) seed.push_back(k * target.size() + j);
                }
            auto sol = detail::solve_sot_colgen(fam.m(), target.size(), n, fam.mean_weights,
                                                fam.ratios, target.weights, cmin, seed);
            lower = sol.objective;
        }

        // build the map: split each source cell by conditional probabilities,
        // then map each piece monotonically onto its target cell
        MongeApproxResult res;
        res.epsilon = epsilon;
        res.uniform_cells = cells_n;
        res.plan_cost = solved.cost;
        res.lower_bound = lower;
        res.slack = solved.cost - lower;
        res.plan = solved.plan;
        res.discrete_family = fam;
        res.discrete_target = target;
        res.per_measure_cost.assign(n, 0.0);

        for (std::size_t k = 0; k < fam.m(); ++k) {
            const auto& sc = src_cells[src_cell_of[k]];
            const double row = fam.mean_weights[k];
            double x = sc.lo;
            const double len = sc.hi - sc.lo;
            for (std::size_t j = 0; j < target.size(); ++j) {
                const double massv = solved.plan.at(k, j);
                if (massv <= 1e-15) continue;
                const double share = massv / row;
                const double xs = x, xe = x + share * len;
                x = xe;
                const auto& tc = tgt_cells[tgt_cell_of[j]];
                if (xe - xs <= 1e-15) continue;
                const double a = (tc.hi - tc.lo) / (xe - xs);
                const double b = tc.lo - a * xs;
                res.map.pieces.push_back({xs, xe, a, b});
                // exact per-measure transport cost of this piece
                const double u = 1.0 - a;
                double cost_int;
                if (std::abs(u) > 1e-15) {
                    auto F3 = [&](double t) { double v = u * t - b; return v * v * v; };
                    cost_int = (F3(xe) - F3(xs)) / (3.0 * u);
                } else {
                    cost_int = b * b * (xe - xs);
                }
                for (std::size_t i = 0; i < n; ++i)
                    res.per_measure_cost[i] +=
                        detail::value_at(family[i], 0.5 * (xs + xe)) * cost_int;
            }
        }
        res.map_cost = 0.0;
        for (double c : res.per_measure_cost) res.map_cost += c;
        res.map_cost /= static_cast<double>(n);
        return res;
    }
    throw ResolutionTooCoarseError("unreachable");
}

struct MonotoneMixingResult {
    DiscreteMeasure target;
    TransportPlan plan;
    double cost = 0.0;
    bool fell_back = false;
    std::string reason;
    double solve_free_cost = 0.0;
};

/// Greedy free-target construction on the line: emit mixing candidates in
/// increasing barycenter order, each time routing as much mass as remains
/// feasible. The result is audited against solve_free; on a stall or a cost
/// mismatch the solve_free answer is returned and flagged.
inline MonotoneMixingResult monotone_mixing_1d(const MeasureFamily& family,
                                               const EnumerationOptions& opts = {},
                                               const Tolerances& tol = {}) {
    if (family.dim() != 1) throw DimensionMismatchError("monotone_mixing_1d requires d = 1");
    auto emb = simplex_embed(family, tol);
    auto candidates = enumerate_minimal_subsets(family, emb, opts, tol);
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (candidates[a].barycenter[0] != candidates[b].barycenter[0])
            return candidates[a].barycenter[0] < candidates[b].barycenter[0];
        return candidates[a].indices < candidates[b].indices;
    });

    std::vector<double> remaining = family.mean_weights;
    std::vector<std::pair<std::size_t, double>> emissions;  // candidate, mass
    bool stalled = false;
    for (;;) {
        double left = 0.0;
        for (double v : remaining) left += v;
        if (left <= tol.feas) break;
        bool emitted = false;
        for (std::size_t oi : order) {
            const auto& c = candidates[oi];
            double t = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < c.indices.size(); ++a)
                t = std::min(t, remaining[c.indices[a]] / c.weights[a]);
            if (t <= 1e-13) continue;
            emissions.emplace_back(oi, t);
            for (std::size_t a = 0; a < c.indices.size(); ++a) {
                remaining[c.indices[a]] -= t * c.weights[a];
                if (remaining[c.indices[a]] < 1e-13) remaining[c.indices[a]] = 0.0;
            }
            emitted = true;
            break;
        }
        if (!emitted) { stalled = true; break; }
    }

    auto reference = solve_free(family, opts, tol);
    MonotoneMixingResult res;
    res.solve_free_cost = reference.cost;
    if (stalled) {
        res.fell_back = true;
        res.reason = "greedy stall: no feasible conditional from remaining mass";
    } else {
        // assemble, merging equal barycenters (emissions are bary-sorted)
        TransportPlan plan;
        plan.source = family.support;
        std::vector<std::size_t> col_of(emissions.size());
        for (std::size_t e = 0; e < emissions.size(); ++e) {
            const auto& c = candidates[emissions[e].first];
            std::size_t found = plan.target.size();
            for (std::size_t t = 0; t < plan.target.size(); ++t)
                if (inf_dist(plan.target[t], c.barycenter) <= tol.geom) { found = t; break; }
            if (found == plan.target.size()) plan.target.push_back(c.barycenter);
            col_of[e] = found;
        }
        plan.matrix.assign(family.m() * plan.target.size(), 0.0);
        for (std::size_t e = 0; e < emissions.size(); ++e) {
            const auto& c = candidates[emissions[e].first];
            for (std::size_t a = 0; a < c.indices.size(); ++a)
                plan.at(c.indices[a], col_of[e]) += emissions[e].second * c.weights[a];
        }
        res.plan = plan;
        res.target.points = plan.target;
        res.target.weights = plan.col_sums();
        res.cost = plan_cost(res.plan);
        if (std::abs(res.cost - reference.cost) > tol.cmp) {
            res.fell_back = true;
            res.reason = "greedy cost mismatch against solve_free";
        }
    }
    if (res.fell_back) {
        res.plan = reference.plan;
        res.target = reference.target;
        res.cost = reference.cost;
    }
    return res;
}

struct ConstancyReport {
    std::vector<std::vector<std::size_t>> regions;  // source indices per region
    // sources whose plan row splits across several targets, with the targets
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> split_sources;
};

struct MongeExtraction {
    bool is_map = false;
    std::vector<std::size_t> assignment;  // source index -> target column (when is_map)
    double max_pushforward_error = 0.0;   // when is_map
    ConstancyReport report;
};

inline std::vector<std::vector<std::size_t>> ratio_constancy_regions(const MeasureFamily& family,
                                                                     const Tolerances& tol = {}) {
    std::vector<std::vector<std::size_t>> regions;
    for (std::size_t k = 0; k < family.m(); ++k) {
        bool placed = false;
        for (auto& reg : regions) {
            const std::size_t ref = reg.front();
            bool same = true;
            for (std::size_t i = 0; i < family.n() && same; ++i)
                if (std::abs(family.ratios[i][k] - family.ratios[i][ref]) > tol.geom) same = false;
            if (same) {
                reg.push_back(k);
                placed = true;
                break;
            }
        }
        if (!placed) regions.push_back({k});
    }
    return regions;
}

/// Reads a Monge map off an optimal plan when the plan is graph-supported
/// within every ratio-constancy region; otherwise reports the split sources.
inline MongeExtraction extract_monge_map(const TransportPlan& plan, const MeasureFamily& family,
                                         const Tolerances& tol = {}) {
    MongeExtraction out;
    out.report.regions = ratio_constancy_regions(family, tol);
    out.assignment.assign(plan.rows(), 0);
    bool graph = true;
    for (std::size_t k = 0; k < plan.rows(); ++k) {
        double row = 0.0, best = -1.0;
        std::size_t bestj = 0;
        std::vector<std::size_t> hit;
        for (std::size_t j = 0; j < plan.cols(); ++j) {
            const double v = plan.at(k, j);
            row += v;
            if (v > tol.feas) hit.push_back(j);
            if (v > best) { best = v; bestj = j; }
        }
        out.assignment[k] = bestj;
        if (row - best > tol.feas) {
            graph = false;
            out.report.split_sources.emplace_back(k, hit);
        }
    }
    out.is_map = graph;
    if (graph) {
        auto nu = plan.col_sums();
        for (std::size_t i = 0; i < family.n(); ++i)
            for (std::size_t j = 0; j < plan.cols(); ++j) {
                double pushed = 0.0;
                for (std::size_t k = 0; k < plan.rows(); ++k)
                    if (out.assignment[k] == j) pushed += family.measures[i][k];
                out.max_pushforward_error =
                    std::max(out.max_pushforward_error, std::abs(pushed - nu[j]));
            }
    }
    return out;
}

}  // namespace sot
