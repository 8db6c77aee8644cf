#pragma once

#include <algorithm>
#include <vector>

#include "sot/lp.hpp"
#include "sot/measure.hpp"

namespace sot {

struct SOTInstance {
    MeasureFamily family;
    DiscreteMeasure target;
    CostSpec cost;
};

/// Kantorovich potentials for the discrete problem: phi over source points,
/// psi_i over target points, one vector per measure.
struct DualPotentials {
    std::vector<double> phi;               // m
    std::vector<std::vector<double>> psi;  // n x l
    double objective = 0.0;
};

struct FixedSolution {
    TransportPlan plan;
    double cost = 0.0;
    LPSolution lp;
};

namespace detail {

/// Shared LP assembly for the floating and exact paths. Variables pi_kj in
/// row-major order; rows: m source marginals, l target marginals, then one
/// mixing row per (i, j) for i = 0..n-2 (the n-th is linearly dependent and
/// omitted).
template <class T>
LinearProgramT<T> assemble_sot_lp(std::size_t m, std::size_t l, std::size_t n,
                                  const std::vector<T>& mean_weights,
                                  const std::vector<std::vector<T>>& ratios,
                                  const std::vector<T>& target_weights,
                                  const std::vector<T>& cost_matrix) {
    LinearProgramT<T> lp;
    lp.cols = m * l;
    lp.rows = m + l + (n - 1) * l;
    lp.objective = cost_matrix;
    lp.A.assign(lp.rows * lp.cols, T(0));
    lp.b.assign(lp.rows, T(0));
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t j = 0; j < l; ++j) lp.at(k, k * l + j) = T(1);
        lp.b[k] = mean_weights[k];
    }
    for (std::size_t j = 0; j < l; ++j) {
        for (std::size_t k = 0; k < m; ++k) lp.at(m + j, k * l + j) = T(1);
        lp.b[m + j] = target_weights[j];
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = 0; j < l; ++j) {
            const std::size_t row = m + l + i * l + j;
            for (std::size_t k = 0; k < m; ++k) {
                T coef = ratios[i][k] - T(1);
                if (coef != T(0)) lp.at(row, k * l + j) = coef;
            }
        }
    return lp;
}

/// Column-generation solve of the transport LP for large m x l grids.
/// Only a working subset of the pi_kj columns is kept in the tableau; the
/// rest are priced with the duals (reduced cost c_kj - y_k - y_{m+j}
/// - sum_i gamma_ij (r_i^k - 1)) and pulled in while negative. Infeasible
/// working sets are repaired by adding columns that break the Farkas
/// certificate. The returned primal is feasible for the full problem and
/// optimal up to the pricing threshold.
struct ColGenResult {
    std::vector<double> primal;  // m * l
    std::vector<double> dual;    // rows
    double objective = 0.0;
};

inline ColGenResult solve_sot_colgen(std::size_t m, std::size_t l, std::size_t n,
                                     const std::vector<double>& mean_weights,
                                     const std::vector<std::vector<double>>& ratios,
                                     const std::vector<double>& target_weights,
                                     const std::vector<double>& cost_matrix,
                                     const std::vector<std::size_t>& seed_columns = {}) {
    const std::size_t rows = m + l + (n - 1) * l;
    const double price_eps = 1e-10;
    std::vector<char> active(m * l, 0);
    std::size_t active_count = 0;
    auto activate = [&](std::size_t col) {
        if (!active[col]) {
            active[col] = 1;
            ++active_count;
        }
    };
    // base working set: a few cheapest per source row / target column.
    // Caller-requested columns are appended through the warm-start path
    // below; solving a large set from scratch degenerates badly, while
    // incremental appends keep the basis near-optimal throughout.
    const std::size_t per_row = std::min<std::size_t>(l, 8);
    for (std::size_t k = 0; k < m; ++k) {
        std::vector<std::size_t> js(l);
        for (std::size_t j = 0; j < l; ++j) js[j] = j;
        std::partial_sort(js.begin(), js.begin() + per_row, js.end(),
                          [&](std::size_t a, std::size_t b) {
                              return cost_matrix[k * l + a] < cost_matrix[k * l + b];
                          });
        for (std::size_t t = 0; t < per_row; ++t) activate(k * l + js[t]);
    }
    for (std::size_t j = 0; j < l; ++j) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < m; ++k)
            if (cost_matrix[k * l + j] < cost_matrix[best * l + j]) best = k;
        activate(best * l + j);
    }

    // y^T A for one column, used for both pricing and Farkas repair
    auto column_dot = [&](const std::vector<double>& y, std::size_t k, std::size_t j) {
        double s = y[k] + y[m + j];
        for (std::size_t i = 0; i + 1 < n; ++i)
            s += y[m + l + i * l + j] * (ratios[i][k] - 1.0);
        return s;
    };

    // sparse constraint column of pi_kj in the original row space
    auto sparse_col = [&](std::size_t c) {
        const std::size_t k = c / l, j = c % l;
        std::vector<std::pair<std::size_t, double>> col;
        col.reserve(n + 1);
        col.emplace_back(k, 1.0);
        col.emplace_back(m + j, 1.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double coef = ratios[i][k] - 1.0;
            if (coef != 0.0) col.emplace_back(m + l + i * l + j, coef);
        }
        return col;
    };

    // one tableau for the whole run; later columns warm-start from the
    // current basis instead of re-solving both phases from scratch
    std::vector<std::size_t> cols;
    cols.reserve(active_count);
    for (std::size_t c = 0; c < m * l; ++c)
        if (active[c]) cols.push_back(c);
    LinearProgram lp;
    lp.cols = cols.size();
    lp.rows = rows;
    lp.objective.resize(lp.cols);
    lp.A.assign(rows * lp.cols, 0.0);
    lp.b.assign(rows, 0.0);
    for (std::size_t k = 0; k < m; ++k) lp.b[k] = mean_weights[k];
    for (std::size_t j = 0; j < l; ++j) lp.b[m + j] = target_weights[j];
    for (std::size_t a = 0; a < cols.size(); ++a) {
        lp.objective[a] = cost_matrix[cols[a]];
        for (const auto& [row, v] : sparse_col(cols[a])) lp.at(row, a) = v;
    }
    SimplexTableau<double> tab(lp);
    LPSolution sol = tab.solve();

    auto append = [&](const std::vector<std::size_t>& added) {
        std::vector<std::vector<std::pair<std::size_t, double>>> sp;
        std::vector<double> costs;
        sp.reserve(added.size());
        costs.reserve(added.size());
        for (std::size_t c : added) {
            activate(c);
            cols.push_back(c);
            sp.push_back(sparse_col(c));
            costs.push_back(cost_matrix[c]);
        }
        sol = tab.add_columns_and_resolve(sp, costs);
    };

    std::vector<std::size_t> pending;
    for (std::size_t c : seed_columns)
        if (!active[c]) {
            active[c] = 1;  // reserve; appended in chunks right below
            pending.push_back(c);
        }
    // growing chunks: each append resumes the simplex from the current
    // basis, and the fixed per-resume overhead dominates for small chunks
    for (std::size_t s = 0, step = 256; s < pending.size(); s += step, step *= 2) {
        std::vector<std::size_t> chunk(pending.begin() + s,
                                       pending.begin() + std::min(pending.size(), s + step));
        for (std::size_t c : chunk) active[c] = 0;  // append() re-activates
        append(chunk);
    }

    for (int round = 0; round < 2000; ++round) {
        if (sol.status == LPStatus::Infeasible) {
            // add columns with y^T A_col > 0: they break the certificate
            std::vector<std::size_t> added;
            for (std::size_t c = 0; c < m * l; ++c) {
                if (active[c]) continue;
                if (column_dot(sol.certificate, c / l, c % l) > price_eps) added.push_back(c);
            }
            if (added.empty())
                throw InternalInfeasibleError("transport LP infeasible beyond repair");
            append(added);
            continue;
        }
        if (sol.status != LPStatus::Optimal)
            throw NumericalBreakdownError("restricted transport LP failed");

        // pricing: pull in the most negative reduced costs, capped per round
        std::vector<std::pair<double, std::size_t>> violated;
        for (std::size_t c = 0; c < m * l; ++c) {
            if (active[c]) continue;
            const double rc = cost_matrix[c] - column_dot(sol.dual, c / l, c % l);
            if (rc < -price_eps) violated.emplace_back(rc, c);
        }
        if (violated.empty()) {
            ColGenResult out;
            out.primal.assign(m * l, 0.0);
            for (std::size_t a = 0; a < cols.size(); ++a) out.primal[cols[a]] = sol.primal[a];
            out.dual = sol.dual;
            out.objective = sol.objective;
            return out;
        }
        const std::size_t cap = 64;
        if (violated.size() > cap) {
            std::partial_sort(violated.begin(), violated.begin() + cap, violated.end());
            violated.resize(cap);
        }
        // keep the working set narrow: idle columns are cheap to re-add but
        // expensive to drag through every pivot of the dense tableau
        if (cols.size() > 2 * rows + 1024) {
            const std::vector<std::size_t> keep = tab.purge_nonbasic(1e-5);
            std::vector<std::size_t> cols2(keep.size());
            for (std::size_t a = 0; a < keep.size(); ++a) cols2[a] = cols[keep[a]];
            if (cols2.size() < cols.size()) {
                std::fill(active.begin(), active.end(), char(0));
                for (std::size_t c : cols2) active[c] = 1;
                active_count = cols2.size();
                cols = std::move(cols2);
            }
        }
        std::vector<std::size_t> added;
        added.reserve(violated.size());
        for (const auto& [rc, c] : violated) added.push_back(c);
        append(added);
    }
    throw NumericalBreakdownError("column generation did not converge");
}

inline std::vector<double> cost_matrix_of(const SOTInstance& inst) {
    const std::size_t m = inst.family.m(), l = inst.target.size();
    std::vector<double> c(m * l);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t j = 0; j < l; ++j)
            c[k * l + j] = inst.cost.value(inst.family.support[k], inst.target.points[j], k, j);
    return c;
}

}  // namespace detail

inline LinearProgram build_sot_lp(const SOTInstance& inst) {
    return detail::assemble_sot_lp<double>(inst.family.m(), inst.target.size(), inst.family.n(),
                                           inst.family.mean_weights, inst.family.ratios,
                                           inst.target.weights, detail::cost_matrix_of(inst));
}

inline FixedSolution solve_fixed(const SOTInstance& inst, const Tolerances& tol = {}) {
    LinearProgram lp = build_sot_lp(inst);
    LPSolution sol = solve(lp);
    if (sol.status == LPStatus::Infeasible)
        throw InternalInfeasibleError(
            "fixed-target LP reported infeasible; the product plan is always feasible, "
            "so the constraint assembly is broken");
    if (sol.status == LPStatus::Unbounded)
        throw InternalInfeasibleError("fixed-target LP unbounded (cost must be >= 0)");
    FixedSolution out;
    out.plan.source = inst.family.support;
    out.plan.target = inst.target.points;
    out.plan.matrix = sol.primal;
    out.cost = sol.objective;
    out.plan.cached_cost = sol.objective;
    out.lp = std::move(sol);
    auto rep = check_plan(out.plan, inst.family, inst.target, tol);
    if (!rep.feasible)
        throw InternalInfeasibleError("solver output fails feasibility check");
    return out;
}

/// Potentials from the LP dual: source-row duals give phi; the target-row
/// and mixing-row duals are recombined into one psi_i per measure so that
/// phi(x_k) + sum_i r_i^k psi_i(y_j) <= c_kj.
inline DualPotentials dual_potentials(const SOTInstance& inst, const FixedSolution& solved) {
    const std::size_t m = inst.family.m(), l = inst.target.size(), n = inst.family.n();
    const auto& y = solved.lp.dual;
    DualPotentials dp;
    dp.phi.assign(y.begin(), y.begin() + m);
    dp.psi.assign(n, std::vector<double>(l, 0.0));
    for (std::size_t j = 0; j < l; ++j) {
        const double beta = y[m + j];
        double gamma_sum = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) gamma_sum += y[m + l + i * l + j];
        const double shared = (beta - gamma_sum) / static_cast<double>(n);
        for (std::size_t i = 0; i + 1 < n; ++i) dp.psi[i][j] = y[m + l + i * l + j] + shared;
        dp.psi[n - 1][j] = shared;
    }
    dp.objective = 0.0;
    for (std::size_t k = 0; k < m; ++k) dp.objective += dp.phi[k] * inst.family.mean_weights[k];
    for (std::size_t j = 0; j < l; ++j) {
        double psum = 0.0;
        for (std::size_t i = 0; i < n; ++i) psum += dp.psi[i][j];
        dp.objective += psum * inst.target.weights[j];
    }
    return dp;
}

inline DualPotentials dual_potentials(const SOTInstance& inst, const Tolerances& tol = {}) {
    return dual_potentials(inst, solve_fixed(inst, tol));
}

/// Largest violation of phi(x_k) + sum_i r_i^k psi_i(y_j) <= c_kj.
inline double dual_feasibility_violation(const SOTInstance& inst, const DualPotentials& dp) {
    const std::size_t m = inst.family.m(), l = inst.target.size(), n = inst.family.n();
    auto c = detail::cost_matrix_of(inst);
    double worst = 0.0;
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t j = 0; j < l; ++j) {
            double lhs = dp.phi[k];
            for (std::size_t i = 0; i < n; ++i) lhs += inst.family.ratios[i][k] * dp.psi[i][j];
            worst = std::max(worst, lhs - c[k * l + j]);
        }
    return worst;
}

/// Exact-rational fixed-target solve from rational inputs.
struct ExactSOTInput {
    std::vector<std::vector<Rational>> points;          // m x d
    std::vector<std::vector<Rational>> weight_vectors;  // n x m
    std::vector<std::vector<Rational>> target_points;   // l x d
    std::vector<Rational> target_weights;               // l
    std::vector<Rational> cost_matrix;                  // m x l, empty => squared Euclidean
};

inline LinearProgramT<Rational> build_sot_lp_exact(const ExactSOTInput& in) {
    const std::size_t m = in.points.size(), n = in.weight_vectors.size(),
                      l = in.target_points.size();
    std::vector<Rational> mean(m, Rational(0));
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < n; ++i) mean[k] += in.weight_vectors[i][k];
        mean[k] /= static_cast<int>(n);
        if (mean[k] == 0) throw EmptySupportError("zero mean mass in exact mode");
    }
    std::vector<std::vector<Rational>> ratios(n, std::vector<Rational>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) ratios[i][k] = in.weight_vectors[i][k] / mean[k];
    std::vector<Rational> cost = in.cost_matrix;
    if (cost.empty()) {
        cost.assign(m * l, Rational(0));
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t j = 0; j < l; ++j) {
                Rational s(0);
                for (std::size_t c2 = 0; c2 < in.points[k].size(); ++c2) {
                    Rational d = in.points[k][c2] - in.target_points[j][c2];
                    s += d * d;
                }
                cost[k * l + j] = s;
            }
    }
    return detail::assemble_sot_lp<Rational>(m, l, n, mean, ratios, in.target_weights, cost);
}

inline LPSolutionT<Rational> solve_fixed_exact(const ExactSOTInput& in) {
    auto sol = solve_exact(build_sot_lp_exact(in));
    if (sol.status != LPStatus::Optimal)
        throw InternalInfeasibleError("exact fixed-target LP did not reach an optimum");
    return sol;
}

}  // namespace sot
