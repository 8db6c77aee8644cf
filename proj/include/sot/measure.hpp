#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include "sot/common.hpp"

namespace sot {

/// A finitely supported measure: points in R^d with nonnegative weights.
struct DiscreteMeasure {
    std::vector<Point> points;
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }
    std::size_t dim() const { return points.empty() ? 0 : points[0].size(); }
    double total_mass() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
};

/// n probability measures on a shared support, their mean measure and the
/// density ratios r_i^k = mu_i^k / mean^k against it.
struct MeasureFamily {
    std::vector<Point> support;                 // m points
    std::vector<std::vector<double>> measures;  // n x m
    std::vector<double> mean_weights;           // m
    std::vector<std::vector<double>> ratios;    // n x m
    std::vector<std::size_t> dropped;           // original indices removed (zero mean mass)

    std::size_t n() const { return measures.size(); }
    std::size_t m() const { return support.size(); }
    std::size_t dim() const { return support.empty() ? 0 : support[0].size(); }

    DiscreteMeasure measure(std::size_t i) const { return {support, measures[i]}; }
    DiscreteMeasure mean_measure() const { return {support, mean_weights}; }
};

/// Coupling matrix between a source and a target support.
struct TransportPlan {
    std::vector<Point> source;   // m
    std::vector<Point> target;   // l
    std::vector<double> matrix;  // m x l, row-major
    mutable std::optional<double> cached_cost;

    std::size_t rows() const { return source.size(); }
    std::size_t cols() const { return target.size(); }
    double& at(std::size_t k, std::size_t j) { return matrix[k * cols() + j]; }
    double at(std::size_t k, std::size_t j) const { return matrix[k * cols() + j]; }

    std::vector<double> row_sums() const {
        std::vector<double> r(rows(), 0.0);
        for (std::size_t k = 0; k < rows(); ++k)
            for (std::size_t j = 0; j < cols(); ++j) r[k] += at(k, j);
        return r;
    }
    std::vector<double> col_sums() const {
        std::vector<double> c(cols(), 0.0);
        for (std::size_t k = 0; k < rows(); ++k)
            for (std::size_t j = 0; j < cols(); ++j) c[j] += at(k, j);
        return c;
    }
};

/// Either the default squared Euclidean cost or an explicit m x l matrix.
struct CostSpec {
    enum class Kind { SquaredEuclidean, Explicit };
    Kind kind = Kind::SquaredEuclidean;
    std::vector<double> matrix;  // row-major when Explicit
    std::size_t rows = 0, cols = 0;

    static CostSpec squared_euclidean() { return {}; }
    static CostSpec explicit_matrix(std::vector<double> m, std::size_t r, std::size_t c) {
        return {Kind::Explicit, std::move(m), r, c};
    }

    double value(const Point& x, const Point& y, std::size_t k, std::size_t j) const {
        if (kind == Kind::SquaredEuclidean) return sq_dist(x, y);
        if (k >= rows || j >= cols) throw DimensionMismatchError("cost matrix too small");
        return matrix[k * cols + j];
    }
};

struct FeasibilityReport {
    double max_row_error = 0.0;
    double max_col_error = 0.0;
    double max_mixing_residual = 0.0;
    bool feasible = false;
    std::vector<double> induced_target;  // column sums, filled for FREE target
};

/// Marker for the free-marginal problem: the column marginal is not checked.
struct FreeTarget {};

inline MeasureFamily build_family(const std::vector<Point>& points,
                                  const std::vector<std::vector<double>>& weight_vectors,
                                  const Tolerances& tol = {}) {
    const std::size_t m = points.size();
    const std::size_t n = weight_vectors.size();
    if (m == 0 || n == 0) throw EmptySupportError("empty support or no measures");
    for (std::size_t a = 0; a < m; ++a) {
        if (points[a].size() != points[0].size())
            throw DimensionMismatchError("inconsistent point dimensions");
        for (std::size_t b = a + 1; b < m; ++b)
            if (inf_dist(points[a], points[b]) <= tol.geom)
                throw NonProbabilityError("support points not pairwise distinct");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& w = weight_vectors[i];
        if (w.size() != m) throw DimensionMismatchError("weight vector length mismatch");
        double s = 0.0;
        for (double v : w) {
            if (v < 0.0) throw NonProbabilityError("negative weight");
            s += v;
        }
        if (std::abs(s - 1.0) > tol.mass) {
            std::ostringstream os;
            os << "measure " << i << " has mass " << s;
            throw NonProbabilityError(os.str());
        }
    }

    MeasureFamily fam;
    std::vector<double> mean(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < n; ++i) mean[k] += weight_vectors[i][k];
        mean[k] /= static_cast<double>(n);
    }
    for (std::size_t k = 0; k < m; ++k) {
        if (mean[k] <= 0.0) {
            fam.dropped.push_back(k);
            continue;
        }
        fam.support.push_back(points[k]);
    }
    if (fam.support.empty()) throw EmptySupportError("all support points have zero mean mass");
    fam.measures.assign(n, {});
    fam.ratios.assign(n, {});
    for (std::size_t k = 0; k < m; ++k) {
        if (mean[k] <= 0.0) continue;
        fam.mean_weights.push_back(mean[k]);
        for (std::size_t i = 0; i < n; ++i) {
            fam.measures[i].push_back(weight_vectors[i][k]);
            fam.ratios[i].push_back(weight_vectors[i][k] / mean[k]);
        }
    }
    return fam;
}

namespace detail {
inline void check_dims(const TransportPlan& plan, const MeasureFamily& family) {
    if (plan.rows() != family.m()) throw DimensionMismatchError("plan rows != family support");
    if (plan.matrix.size() != plan.rows() * plan.cols())
        throw DimensionMismatchError("plan matrix size mismatch");
}
}  // namespace detail

/// Feasibility report against a fixed target measure.
inline FeasibilityReport check_plan(const TransportPlan& plan, const MeasureFamily& family,
                                    const DiscreteMeasure& target, const Tolerances& tol = {}) {
    detail::check_dims(plan, family);
    if (plan.cols() != target.size()) throw DimensionMismatchError("plan cols != target size");
    FeasibilityReport rep;
    auto rows = plan.row_sums();
    auto cols = plan.col_sums();
    for (std::size_t k = 0; k < plan.rows(); ++k)
        rep.max_row_error = std::max(rep.max_row_error, std::abs(rows[k] - family.mean_weights[k]));
    for (std::size_t j = 0; j < plan.cols(); ++j)
        rep.max_col_error = std::max(rep.max_col_error, std::abs(cols[j] - target.weights[j]));
    for (std::size_t i = 0; i < family.n(); ++i)
        for (std::size_t j = 0; j < plan.cols(); ++j) {
            double res = 0.0;
            for (std::size_t k = 0; k < plan.rows(); ++k)
                res += plan.at(k, j) * (family.ratios[i][k] - 1.0);
            rep.max_mixing_residual = std::max(rep.max_mixing_residual, std::abs(res));
        }
    rep.feasible = rep.max_row_error <= tol.feas && rep.max_col_error <= tol.feas &&
                   rep.max_mixing_residual <= tol.feas;
    return rep;
}

/// Free-marginal variant: the column marginal is unconstrained and returned
/// as the induced target.
inline FeasibilityReport check_plan(const TransportPlan& plan, const MeasureFamily& family,
                                    FreeTarget, const Tolerances& tol = {}) {
    detail::check_dims(plan, family);
    FeasibilityReport rep;
    auto rows = plan.row_sums();
    for (std::size_t k = 0; k < plan.rows(); ++k)
        rep.max_row_error = std::max(rep.max_row_error, std::abs(rows[k] - family.mean_weights[k]));
    rep.induced_target = plan.col_sums();
    for (std::size_t i = 0; i < family.n(); ++i)
        for (std::size_t j = 0; j < plan.cols(); ++j) {
            double res = 0.0;
            for (std::size_t k = 0; k < plan.rows(); ++k)
                res += plan.at(k, j) * (family.ratios[i][k] - 1.0);
            rep.max_mixing_residual = std::max(rep.max_mixing_residual, std::abs(res));
        }
    rep.feasible = rep.max_row_error <= tol.feas && rep.max_mixing_residual <= tol.feas;
    return rep;
}

inline double plan_cost(const TransportPlan& plan, const CostSpec& cost = {}) {
    if (cost.kind == CostSpec::Kind::Explicit &&
        (cost.rows != plan.rows() || cost.cols != plan.cols()))
        throw DimensionMismatchError("cost matrix dimensions do not match plan");
    double total = 0.0;
    for (std::size_t k = 0; k < plan.rows(); ++k)
        for (std::size_t j = 0; j < plan.cols(); ++j) {
            const double m = plan.at(k, j);
            if (m != 0.0) total += m * cost.value(plan.source[k], plan.target[j], k, j);
        }
    plan.cached_cost = total;
    return total;
}

/// Conditional measure pi^{y_j}: column j normalized to unit mass.
inline DiscreteMeasure conditional_on_target(const TransportPlan& plan, std::size_t j) {
    if (j >= plan.cols()) throw DimensionMismatchError("column index out of range");
    double mass = 0.0;
    for (std::size_t k = 0; k < plan.rows(); ++k) mass += plan.at(k, j);
    if (mass <= 0.0) throw ZeroColumnError("zero column mass");
    DiscreteMeasure cond;
    for (std::size_t k = 0; k < plan.rows(); ++k) {
        if (plan.at(k, j) == 0.0) continue;
        cond.points.push_back(plan.source[k]);
        cond.weights.push_back(plan.at(k, j) / mass);
    }
    return cond;
}

/// g(y_j) = mean source location of the conditional at y_j. Sorted by target
/// coordinate for d = 1; empty columns are skipped.
inline std::vector<std::pair<Point, Point>> barycentric_function(const TransportPlan& plan) {
    std::vector<std::pair<Point, Point>> out;
    const std::size_t d = plan.source.empty() ? 0 : plan.source[0].size();
    for (std::size_t j = 0; j < plan.cols(); ++j) {
        double mass = 0.0;
        Point g(d, 0.0);
        for (std::size_t k = 0; k < plan.rows(); ++k) {
            const double w = plan.at(k, j);
            if (w == 0.0) continue;
            mass += w;
            for (std::size_t c = 0; c < d; ++c) g[c] += w * plan.source[k][c];
        }
        if (mass <= 0.0) continue;
        for (std::size_t c = 0; c < d; ++c) g[c] /= mass;
        out.emplace_back(plan.target[j], std::move(g));
    }
    if (d == 1)
        std::sort(out.begin(), out.end(),
                  [](const auto& a, const auto& b) { return a.first[0] < b.first[0]; });
    return out;
}

/// Independent coupling mean x target; feasible for every family and target.
inline TransportPlan product_plan(const MeasureFamily& family, const DiscreteMeasure& target) {
    TransportPlan plan;
    plan.source = family.support;
    plan.target = target.points;
    plan.matrix.resize(family.m() * target.size());
    for (std::size_t k = 0; k < family.m(); ++k)
        for (std::size_t j = 0; j < target.size(); ++j)
            plan.matrix[k * target.size() + j] = family.mean_weights[k] * target.weights[j];
    return plan;
}

}  // namespace sot
