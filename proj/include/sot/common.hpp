#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sot {

/// Numerical tolerances shared across the library. All are overridable;
/// the defaults sit one decade above double-precision LP residuals.
struct Tolerances {
    double mass = 1e-9;   // total-mass check for probability measures
    double feas = 1e-8;   // marginal / mixing constraint residuals
    double geom = 1e-12;  // coordinate comparisons, point dedup
    double gap = 1e-7;    // primal-dual gap
    double hull = 1e-10;  // convex-hull membership
    double push = 1e-6;   // pushforward identities (Kolmogorov distance)
    double split = 1e-7;  // Lyapunov split equalities
    double cmp = 1e-6;    // oracle cross-checks
};

using Point = std::vector<double>;

inline double sq_dist(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double inf_dist(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
    return s;
}

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonProbabilityError : Error { using Error::Error; };
struct EmptySupportError : Error { using Error::Error; };
struct DimensionMismatchError : Error { using Error::Error; };
struct ZeroColumnError : Error { using Error::Error; };
struct NumericalBreakdownError : Error { using Error::Error; };
struct TooLargeError : Error { using Error::Error; };
struct InternalInfeasibleError : Error { using Error::Error; };
struct BarycenterIdentityViolatedError : Error { using Error::Error; };
struct EnumerationCapExceededError : Error { using Error::Error; };
struct NoCandidateError : Error { using Error::Error; };
struct NotOnUnitIntervalError : Error { using Error::Error; };
struct BadRangeError : Error { using Error::Error; };
struct ResolutionTooCoarseError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

}  // namespace sot
