#pragma once

#include <optional>

#include "sot/io.hpp"
#include "sot/line1d.hpp"
#include "sot/measure.hpp"

namespace sot::io {

/// In-memory view of a problem file. The raw document is retained so the
/// exact mode can re-read decimals as rationals.
struct Problem {
    std::size_t dimension = 1;
    std::vector<Point> support;
    std::vector<std::vector<double>> measures;
    std::optional<DiscreteMeasure> target;
    std::optional<std::vector<double>> cost_matrix;  // row-major m x l
    std::vector<PiecewiseConstantDensity> densities;
    std::optional<PiecewiseConstantDensity> nu;
    std::optional<TransportPlan> plan;
    Tolerances tol;
    std::uint64_t seed = 1;
    Value raw;

    MeasureFamily family() const { return build_family(support, measures, tol); }

    CostSpec cost_spec() const {
        if (!cost_matrix) return CostSpec::squared_euclidean();
        if (!target) throw ParseError("cost_matrix requires a target block");
        return CostSpec::explicit_matrix(*cost_matrix, support.size(), target->size());
    }
};

inline PiecewiseConstantDensity parse_density(const Value& v) {
    PiecewiseConstantDensity d;
    d.breakpoints = as_double_vector(v.expect("breakpoints"));
    d.values = as_double_vector(v.expect("values"));
    if (d.breakpoints.size() != d.values.size() + 1)
        throw ParseError("density needs |breakpoints| = |values| + 1");
    for (std::size_t i = 0; i + 1 < d.breakpoints.size(); ++i)
        if (d.breakpoints[i + 1] <= d.breakpoints[i])
            throw ParseError("density breakpoints must increase");
    for (double x : d.values)
        if (x < 0.0) throw ParseError("density values must be nonnegative");
    return d;
}

inline Value density_to_value(const PiecewiseConstantDensity& d) {
    Value v = Value::block();
    v.set("breakpoints", from_double_vector(d.breakpoints));
    v.set("values", from_double_vector(d.values));
    return v;
}

inline Problem load_problem(const Value& doc) {
    Problem p;
    p.raw = doc;
    if (const Value* v = doc.find("dimension")) p.dimension = as_size(*v);
    if (const Value* v = doc.find("support")) p.support = as_points(*v);
    if (const Value* v = doc.find("measures")) {
        if (v->kind != Value::Kind::List) throw ParseError("measures must be a list of lists");
        for (const auto& it : v->items) p.measures.push_back(as_double_vector(it));
    }
    if (const Value* v = doc.find("target")) {
        DiscreteMeasure t;
        t.points = as_points(v->expect("points"));
        t.weights = as_double_vector(v->expect("weights"));
        if (t.points.size() != t.weights.size())
            throw ParseError("target points/weights length mismatch");
        p.target = std::move(t);
    }
    if (const Value* v = doc.find("cost_matrix")) {
        std::vector<double> flat;
        for (const auto& row : v->items)
            for (const auto& x : row.items) flat.push_back(as_double(x));
        p.cost_matrix = std::move(flat);
    }
    if (const Value* v = doc.find("densities"))
        for (const auto& it : v->items) p.densities.push_back(parse_density(it));
    if (const Value* v = doc.find("nu")) p.nu = parse_density(*v);
    if (const Value* v = doc.find("plan")) {
        TransportPlan plan;
        plan.source = p.support;
        plan.target = as_points(v->expect("target_points"));
        const Value& mat = v->expect("matrix");
        for (const auto& row : mat.items)
            for (const auto& x : row.items) plan.matrix.push_back(as_double(x));
        if (plan.matrix.size() != plan.source.size() * plan.target.size())
            throw ParseError("plan matrix dimensions do not match support/target");
        p.plan = std::move(plan);
    }
    if (const Value* v = doc.find("options")) {
        if (const Value* t = v->find("tol_mass")) p.tol.mass = as_double(*t);
        if (const Value* t = v->find("tol_feas")) p.tol.feas = as_double(*t);
        if (const Value* t = v->find("tol_geom")) p.tol.geom = as_double(*t);
        if (const Value* t = v->find("tol_gap")) p.tol.gap = as_double(*t);
        if (const Value* t = v->find("seed")) p.seed = as_size(*t);
    }
    // sanity
    for (const auto& pt : p.support)
        if (pt.size() != p.dimension) throw ParseError("support point dimension mismatch");
    return p;
}

inline Problem load_problem(const std::string& text) { return load_problem(parse_document(text)); }

inline Value plan_to_value(const TransportPlan& plan) {
    Value v = Value::block();
    v.set("target_points", from_points(plan.target));
    Value mat = Value::list();
    for (std::size_t k = 0; k < plan.rows(); ++k) {
        Value row = Value::list();
        for (std::size_t j = 0; j < plan.cols(); ++j)
            row.items.push_back(Value::scalar_of(fmt17(plan.at(k, j))));
        mat.items.push_back(std::move(row));
    }
    v.set("matrix", std::move(mat));
    return v;
}

}  // namespace sot::io
