#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "sot/common.hpp"
#include "sot/rational.hpp"

namespace sot {

/// min c.x  s.t.  A x = b,  x >= 0.
template <class T>
struct LinearProgramT {
    std::size_t rows = 0, cols = 0;
    std::vector<T> objective;  // cols
    std::vector<T> A;          // rows x cols, row-major
    std::vector<T> b;          // rows

    T& at(std::size_t i, std::size_t j) { return A[i * cols + j]; }
    const T& at(std::size_t i, std::size_t j) const { return A[i * cols + j]; }
};

using LinearProgram = LinearProgramT<double>;

enum class LPStatus { Optimal, Infeasible, Unbounded };

template <class T>
struct LPSolutionT {
    LPStatus status = LPStatus::Infeasible;
    std::vector<T> primal;  // cols, valid when Optimal
    std::vector<T> dual;    // rows, valid when Optimal (0 on redundant rows)
    T objective{};
    std::vector<int> basis;                    // basic column indices, -1 for redundant rows
    std::vector<T> certificate;                // Farkas row y: y.A <= 0, y.b > 0 (Infeasible)
    std::vector<T> ray;                        // improving ray (Unbounded)
    std::vector<std::size_t> redundant_rows;   // rows dropped as linearly dependent
};

using LPSolution = LPSolutionT<double>;

namespace detail {

template <class T>
struct simplex_traits {
    static constexpr bool exact = false;
    static T eps_pivot() { return T(1e-13); }
    static T eps_rc() { return T(1e-9); }
    static T eps_feas() { return T(1e-9); }
};

template <>
struct simplex_traits<Rational> {
    static constexpr bool exact = true;
    static Rational eps_pivot() { return 0; }
    static Rational eps_rc() { return 0; }
    static Rational eps_feas() { return 0; }
};

/// Dense tableau primal simplex, two phases, artificial basis start.
/// Entering rule is Dantzig with a permanent switch to Bland's rule after a
/// stall (exact mode uses Bland throughout), so termination is guaranteed.
template <class T>
class SimplexTableau {
  public:
    explicit SimplexTableau(const LinearProgramT<T>& lp)
        : R_(lp.rows), N_(lp.cols), W_(lp.cols + lp.rows + 1) {
        if (R_ < 1 || N_ < 1) throw DimensionMismatchError("empty linear program");
        if (lp.objective.size() != N_ || lp.A.size() != R_ * N_ || lp.b.size() != R_)
            throw DimensionMismatchError("linear program field sizes inconsistent");
        tab_.assign(R_ * W_, T(0));
        flip_.assign(R_, false);
        basis_.assign(R_, 0);
        active_.assign(R_, true);
        in_basis_.assign(N_ + R_, 0);
        for (std::size_t i = 0; i < R_; ++i) {
            const bool flip = lp.b[i] < T(0);
            flip_[i] = flip;
            for (std::size_t j = 0; j < N_; ++j)
                at(i, j) = flip ? -lp.at(i, j) : lp.at(i, j);
            at(i, N_ + i) = T(1);
            rhs(i) = flip ? -lp.b[i] : lp.b[i];
            basis_[i] = static_cast<int>(N_ + i);
            in_basis_[N_ + i] = 1;
        }
        cost_ = lp.objective;
        // original columns and rhs (in flipped row space), kept for the
        // basis-refresh pass that undoes accumulated tableau roundoff
        sparse_cols_.resize(N_);
        b_orig_.resize(R_);
        bscale_ = T(1);
        for (std::size_t i = 0; i < R_; ++i) {
            b_orig_[i] = rhs(i);
            bscale_ = std::max<T>(bscale_, abs_val(b_orig_[i]));
            for (std::size_t j = 0; j < N_; ++j)
                if (at(i, j) != T(0)) sparse_cols_[j].emplace_back(i, at(i, j));
        }
    }

    LPSolutionT<T> solve() {
        use_bland_ = simplex_traits<T>::exact;

        // Phase 1: minimize the sum of artificials.
        obj_.assign(W_, T(0));
        for (std::size_t i = 0; i < R_; ++i) {
            for (std::size_t j = 0; j < N_; ++j) obj_[j] -= at(i, j);
            obj_[W_ - 1] -= rhs(i);
        }
        phase_ = 1;
        return optimize();
    }

    /// Appends structural columns to the program and re-optimizes from the
    /// current basis (warm start). Valid after solve(): an Infeasible result
    /// resumes phase 1, an Optimal one resumes phase 2. Each column is a
    /// sparse list of (row, value) entries in the original row space.
    LPSolutionT<T> add_columns_and_resolve(
        const std::vector<std::vector<std::pair<std::size_t, T>>>& cols,
        const std::vector<T>& costs) {
        const std::size_t K = cols.size();
        if (costs.size() != K) throw DimensionMismatchError("column/cost count mismatch");
        if (K == 0) return optimize();
        const std::size_t N2 = N_ + K, W2 = N2 + R_ + 1;
        std::vector<T> tab2(R_ * W2, T(0));
        for (std::size_t i = 0; i < R_; ++i) {
            std::copy(tab_.begin() + i * W_, tab_.begin() + i * W_ + N_, tab2.begin() + i * W2);
            std::copy(tab_.begin() + i * W_ + N_, tab_.begin() + (i + 1) * W_,
                      tab2.begin() + i * W2 + N2);
        }
        std::vector<T> obj2(W2, T(0));
        std::copy(obj_.begin(), obj_.begin() + N_, obj2.begin());
        std::copy(obj_.begin() + N_, obj_.end(), obj2.begin() + N2);
        // The artificial block of the tableau is the running basis inverse
        // (in flipped row space), so a new column enters as B^{-1} a and its
        // reduced cost prices against the current objective row.
        for (std::size_t k = 0; k < K; ++k) {
            T rc = phase_ == 2 ? costs[k] : T(0);
            auto& sc = sparse_cols_.emplace_back();
            for (const auto& [t, raw] : cols[k]) {
                if (t >= R_) throw DimensionMismatchError("column row index out of range");
                const T a = flip_[t] ? -raw : raw;
                if (a == T(0)) continue;
                sc.emplace_back(t, a);
                for (std::size_t i = 0; i < R_; ++i) tab2[i * W2 + N_ + k] += tab2[i * W2 + N2 + t] * a;
                rc += phase_ == 2 ? obj2[N2 + t] * a : (obj2[N2 + t] - T(1)) * a;
            }
            obj2[N_ + k] = rc;
        }
        std::vector<char> inb2(N2 + R_, 0);
        std::copy(in_basis_.begin(), in_basis_.begin() + N_, inb2.begin());
        std::copy(in_basis_.begin() + N_, in_basis_.end(), inb2.begin() + N2);
        for (auto& b : basis_)
            if (b >= static_cast<int>(N_)) b += static_cast<int>(K);
        cost_.insert(cost_.end(), costs.begin(), costs.end());
        tab_ = std::move(tab2);
        obj_ = std::move(obj2);
        in_basis_ = std::move(inb2);
        N_ = N2;
        W_ = W2;
        return optimize();
    }

    /// Drops nonbasic structural columns whose current reduced cost exceeds
    /// `rc_keep` (they cannot improve the solution until the duals move, and
    /// a caller doing column generation can always re-add them). Returns the
    /// original indices of the structural columns kept, in their new order.
    /// Call only after an Optimal result.
    std::vector<std::size_t> purge_nonbasic(const T& rc_keep) {
        std::vector<std::size_t> keep;
        keep.reserve(N_);
        for (std::size_t j = 0; j < N_; ++j)
            if (is_basic(j) || obj_[j] <= rc_keep) keep.push_back(j);
        if (keep.size() == N_) return keep;
        const std::size_t N2 = keep.size(), W2 = N2 + R_ + 1;
        std::vector<T> tab2(R_ * W2);
        for (std::size_t i = 0; i < R_; ++i) {
            for (std::size_t a = 0; a < N2; ++a) tab2[i * W2 + a] = at(i, keep[a]);
            for (std::size_t t = 0; t <= R_; ++t) tab2[i * W2 + N2 + t] = tab_[i * W_ + N_ + t];
        }
        std::vector<T> obj2(W2);
        for (std::size_t a = 0; a < N2; ++a) obj2[a] = obj_[keep[a]];
        for (std::size_t t = 0; t <= R_; ++t) obj2[N2 + t] = obj_[N_ + t];
        std::vector<int> remap(N_, -1);
        std::vector<T> cost2(N2);
        std::vector<std::vector<std::pair<std::size_t, T>>> sc2(N2);
        for (std::size_t a = 0; a < N2; ++a) {
            remap[keep[a]] = static_cast<int>(a);
            cost2[a] = cost_[keep[a]];
            sc2[a] = std::move(sparse_cols_[keep[a]]);
        }
        std::vector<char> inb2(N2 + R_, 0);
        for (auto& b : basis_) {
            b = b >= static_cast<int>(N_) ? static_cast<int>(N2) + (b - static_cast<int>(N_))
                                          : remap[b];
            inb2[b] = 1;
        }
        tab_ = std::move(tab2);
        obj_ = std::move(obj2);
        cost_ = std::move(cost2);
        sparse_cols_ = std::move(sc2);
        in_basis_ = std::move(inb2);
        N_ = N2;
        W_ = W2;
        return keep;
    }

  private:
    // Runs the current phase to completion; transitions phase 1 -> 2 when
    // feasible, and extracts the solution, certificate, or ray.
    LPSolutionT<T> optimize() {
        LPSolutionT<T> sol;
        dual_refreshed_ = false;
        int repairs = 0;
        const auto has_improving = [&] {
            const std::size_t limit = phase_ == 1 ? N_ + R_ : N_;
            for (std::size_t j = 0; j < limit; ++j)
                if (!banned_artificial(j) && !is_basic(j) &&
                    obj_[j] < -simplex_traits<T>::eps_rc())
                    return true;
            return false;
        };
      restart:
        if (phase_ == 1) {
            // After a refresh rewrites the reduced costs exactly, columns the
            // drifted values missed may price as improving: resume pivoting.
            for (int pass = 0;; ++pass) {
                if (!run())
                    throw NumericalBreakdownError(
                        "phase-1 objective unbounded (numerical failure)");
                if constexpr (simplex_traits<T>::exact) break;
                if (pass >= 4 || !refresh_basis_solution() || !has_improving()) break;
            }

            // infeasibility = the mass still carried by basic artificials
            const auto artificial_mass = [&] {
                T s = T(0);
                for (std::size_t i = 0; i < R_; ++i)
                    if (basis_[i] >= static_cast<int>(N_)) s += abs_val(rhs(i));
                return s;
            };
            T infeas = artificial_mass();
            if constexpr (!simplex_traits<T>::exact) {
                // borderline verdicts are re-made on exact basic values; a
                // macroscopic artificial mass needs no such confirmation
                if (infeas > feas_threshold() && infeas <= T(1e4) * feas_threshold() &&
                    refresh_basis_solution(true)) {
                    if (has_improving() && !run())
                        throw NumericalBreakdownError(
                            "phase-1 objective unbounded (numerical failure)");
                    infeas = artificial_mass();
                }
            }
            if (infeas > feas_threshold()) {
                sol.status = LPStatus::Infeasible;
                sol.certificate.assign(R_, T(0));
                for (std::size_t i = 0; i < R_; ++i) {
                    T y = T(1) - obj_[N_ + i];
                    sol.certificate[i] = flip_[i] ? -y : y;
                }
                return sol;
            }

            // Pivot zero-level artificials out where possible. Rows whose
            // artificial cannot be cleared are linearly dependent on the
            // others for the current column set; they stay active with the
            // artificial basic at zero (the ratio test evicts it at ratio 0
            // the moment a later column makes the row independent).
            const T art_pivot = simplex_traits<T>::exact ? T(0) : T(1e-5);
            for (std::size_t i = 0; i < R_; ++i) {
                if (!active_[i] || basis_[i] < static_cast<int>(N_)) continue;
                // the row is satisfied up to phase-1 tolerance: discard the
                // residual so the pivot injects an exact zero
                rhs(i) = T(0);
                std::size_t best_j = N_;
                T best_a = art_pivot;
                for (std::size_t j = 0; j < N_; ++j) {
                    if (is_basic(j)) continue;
                    const T a = abs_val(at(i, j));
                    if (a > best_a) {
                        best_a = a;
                        best_j = j;
                    }
                }
                if (best_j < N_) pivot(i, best_j);
            }

            // Phase 2: original objective priced out over the current basis.
            obj_.assign(W_, T(0));
            for (std::size_t j = 0; j < N_; ++j) obj_[j] = cost_[j];
            for (std::size_t i = 0; i < R_; ++i) {
                if (!active_[i] || basis_[i] >= static_cast<int>(N_)) continue;
                const T cb = cost_[basis_[i]];
                if (cb == T(0)) continue;
                for (std::size_t j = 0; j < W_; ++j) obj_[j] -= cb * at(i, j);
            }
            phase_ = 2;
        }

        std::size_t entering = 0;
        bool bounded = true;
        for (int pass = 0;; ++pass) {
            bounded = run(&entering);
            if (!bounded) break;
            if constexpr (simplex_traits<T>::exact) break;
            // Undo accumulated tableau roundoff before extraction; resume
            // pivoting when the exact reduced costs still show improvement.
            if (pass >= 4 || !refresh_basis_solution() || !has_improving()) break;
        }
        if (!bounded) {
            sol.status = LPStatus::Unbounded;
            sol.ray.assign(N_, T(0));
            sol.ray[entering] = T(1);
            for (std::size_t i = 0; i < R_; ++i)
                if (active_[i] && basis_[i] < static_cast<int>(N_))
                    sol.ray[basis_[i]] = -at(i, entering);
            return sol;
        }

        if constexpr (!simplex_traits<T>::exact) {
            // If exact basic values expose a dependent-looking row whose
            // artificial is actually carrying mass (the ratio test skipped
            // near-zero eviction pivots on it), re-enter phase 1 to clear it.
            if (repairs < 3) {
                bool broken = false;
                const T thr = feas_threshold();
                for (std::size_t i = 0; i < R_; ++i)
                    if (basis_[i] >= static_cast<int>(N_) && abs_val(rhs(i)) > thr) {
                        broken = true;
                        break;
                    }
                if (broken) {
                    ++repairs;
                    dual_refreshed_ = false;
                    obj_.assign(W_, T(0));
                    for (std::size_t j = N_; j < N_ + R_; ++j) obj_[j] = T(1);
                    for (std::size_t i = 0; i < R_; ++i) {
                        if (basis_[i] < static_cast<int>(N_)) continue;
                        for (std::size_t j = 0; j < W_; ++j) obj_[j] -= at(i, j);
                    }
                    phase_ = 1;
                    goto restart;
                }
            }
        }

        sol.status = LPStatus::Optimal;
        sol.primal.assign(N_, T(0));
        sol.basis.assign(R_, -1);
        for (std::size_t i = 0; i < R_; ++i) {
            if (!active_[i]) continue;
            if (basis_[i] >= static_cast<int>(N_)) {
                // an artificial still basic (at zero) marks a dependent row
                sol.redundant_rows.push_back(i);
                continue;
            }
            sol.basis[i] = basis_[i];
            sol.primal[basis_[i]] = rhs(i);
        }
        sol.dual.assign(R_, T(0));
        for (std::size_t i = 0; i < R_; ++i) {
            if (!active_[i]) continue;
            T y = dual_refreshed_ ? fresh_dual_[i] : -obj_[N_ + i];
            sol.dual[i] = flip_[i] ? -y : y;
        }
        sol.objective = T(0);
        for (std::size_t j = 0; j < N_; ++j) sol.objective += cost_[j] * sol.primal[j];
        if constexpr (!simplex_traits<T>::exact) check_residual(sol);
        return sol;
    }

    // The rhs column drifts under long pivot sequences (each zero-level
    // artificial clamp discards sub-tolerance residue). When the basic
    // solution's true residual against the stored original columns exceeds
    // the trigger, recompute the basic values — and, in phase 2, the duals —
    // from a dense LU factorization of the current basis. Returns true when
    // a refresh was performed.
    bool refresh_basis_solution(bool force = false) {
        if constexpr (simplex_traits<T>::exact) return false;
        std::vector<T> acc(R_, T(0));
        for (std::size_t i = 0; i < R_; ++i) {
            const T x = rhs(i);
            const int bi = basis_[i];
            if (bi < static_cast<int>(N_)) {
                for (const auto& [t, a] : sparse_cols_[bi]) acc[t] += a * x;
            } else {
                acc[bi - static_cast<int>(N_)] += x;
            }
        }
        T res = T(0), scale = T(1);
        for (std::size_t i = 0; i < R_; ++i) {
            res = std::max<T>(res, abs_val(acc[i] - b_orig_[i]));
            scale = std::max<T>(scale, abs_val(b_orig_[i]));
        }
        if (!force && res <= T(1e-9) * scale && pivots_since_refresh_ < 2048) return false;
        pivots_since_refresh_ = 0;
#ifdef SOT_LP_DEBUG_REFRESH
        std::fprintf(stderr, "[refresh] phase=%d R=%zu N=%zu res=%.3e\n", phase_, R_, N_,
                     double(res));
#endif

        // LU with partial pivoting: P B = L U (L unit lower, perm[i] = the
        // original row now sitting at position i).
        std::vector<T> lu(R_ * R_, T(0));
        for (std::size_t i = 0; i < R_; ++i) {
            const int bi = basis_[i];
            if (bi < static_cast<int>(N_)) {
                for (const auto& [t, a] : sparse_cols_[bi]) lu[t * R_ + i] = a;
            } else {
                lu[(bi - N_) * R_ + i] = T(1);
            }
        }
        std::vector<std::size_t> perm(R_);
        for (std::size_t i = 0; i < R_; ++i) perm[i] = i;
        for (std::size_t k = 0; k < R_; ++k) {
            std::size_t p = k;
            for (std::size_t i = k + 1; i < R_; ++i)
                if (abs_val(lu[i * R_ + k]) > abs_val(lu[p * R_ + k])) p = i;
            // a numerically singular basis cannot be refreshed; keep the
            // incrementally maintained values (the acceptance test below
            // would reject garbage anyway, this just skips wasted work)
            if (lu[p * R_ + k] == T(0)) {
#ifdef SOT_LP_DEBUG_REFRESH
                int col = basis_[k];
                std::fprintf(stderr,
                             "[refresh]   -> SINGULAR at k=%zu basis_[k]=%d (N=%zu) nnz=%zu\n", k,
                             col, N_,
                             col < static_cast<int>(N_) ? sparse_cols_[col].size() : std::size_t(1));
#endif
                return false;
            }
            if (p != k) {
                for (std::size_t j = 0; j < R_; ++j) std::swap(lu[p * R_ + j], lu[k * R_ + j]);
                std::swap(perm[p], perm[k]);
            }
            const T inv = T(1) / lu[k * R_ + k];
            for (std::size_t i = k + 1; i < R_; ++i) {
                T& f = lu[i * R_ + k];
                if (f == T(0)) continue;
                f *= inv;
                for (std::size_t j = k + 1; j < R_; ++j) lu[i * R_ + j] -= f * lu[k * R_ + j];
            }
        }
        // Solve B v = r through the factors: forward substitution on P r,
        // then back substitution.
        const auto lu_solve = [&](std::vector<T>& r) {
            std::vector<T> v(R_);
            for (std::size_t i = 0; i < R_; ++i) v[i] = r[perm[i]];
            for (std::size_t i = 1; i < R_; ++i)
                for (std::size_t j = 0; j < i; ++j) v[i] -= lu[i * R_ + j] * v[j];
            for (std::size_t i = R_; i-- > 0;) {
                for (std::size_t j = i + 1; j < R_; ++j) v[i] -= lu[i * R_ + j] * v[j];
                v[i] /= lu[i * R_ + i];
            }
            r = std::move(v);
        };
        const auto residual = [&](const std::vector<T>& v, std::vector<T>& r) {
            r.assign(R_, T(0));
            for (std::size_t i = 0; i < R_; ++i) {
                const int bi = basis_[i];
                if (bi < static_cast<int>(N_)) {
                    for (const auto& [t, a] : sparse_cols_[bi]) r[t] += a * v[i];
                } else {
                    r[bi - static_cast<int>(N_)] += v[i];
                }
            }
            T worst = T(0);
            for (std::size_t i = 0; i < R_; ++i) {
                r[i] = b_orig_[i] - r[i];
                worst = std::max<T>(worst, abs_val(r[i]));
            }
            return worst;
        };
        // Solve B x = b with iterative refinement: the basis can be very
        // ill-conditioned (eviction pivots down to 1e-5 are allowed), so a
        // single factored solve may not beat the tableau values on its own.
        std::vector<T> x = b_orig_, r;
        lu_solve(x);
        T res_new = residual(x, r);
        for (int it = 0; it < 6 && res_new > T(1e-13) * scale; ++it) {
            std::vector<T> dx = r;
            lu_solve(dx);
            std::vector<T> cand = x;
            for (std::size_t i = 0; i < R_; ++i) cand[i] += dx[i];
            std::vector<T> r2;
            const T res2 = residual(cand, r2);
            if (!(res2 < res_new)) break;
            x = std::move(cand);
            r = std::move(r2);
            res_new = res2;
        }
        // accept the recomputed values only if they genuinely improve on the
        // tableau's (NaNs from a singular basis fail the comparison and are
        // discarded)
#ifdef SOT_LP_DEBUG_REFRESH
        std::fprintf(stderr, "[refresh]   -> res_new=%.3e %s\n", double(res_new),
                     res_new < res ? "accept" : "REJECT");
#endif
        if (!(res_new < res) && res_new > T(1e-11) * scale) return false;
        for (std::size_t i = 0; i < R_; ++i) rhs(i) = x[i];

        // Recompute the duals for the current phase's costs (structural
        // basics price at cost, artificial basics at 0 in phase 2 / 1 in
        // phase 1) and rewrite the whole objective row from them. This
        // discards reduced-cost drift, which otherwise makes thousands of
        // near-duplicate columns spuriously price as improving.
        const auto basic_cost = [&](std::size_t i) {
            const int bi = basis_[i];
            if (bi < static_cast<int>(N_)) return phase_ == 2 ? cost_[bi] : T(0);
            return phase_ == 2 ? T(0) : T(1);
        };
        // B^T y = c decomposes as U^T z = c, L^T w = z, y = P^T w.
        const auto lu_solve_t = [&](std::vector<T>& c) {
            std::vector<T> z(R_);
            for (std::size_t i = 0; i < R_; ++i) {
                z[i] = c[i];
                for (std::size_t j = 0; j < i; ++j) z[i] -= lu[j * R_ + i] * z[j];
                z[i] /= lu[i * R_ + i];
            }
            for (std::size_t i = R_; i-- > 0;)
                for (std::size_t j = i + 1; j < R_; ++j) z[i] -= lu[j * R_ + i] * z[j];
            c.assign(R_, T(0));
            for (std::size_t i = 0; i < R_; ++i) c[perm[i]] = z[i];
        };
        const auto residual_t = [&](const std::vector<T>& y, std::vector<T>& r) {
            T worst = T(0);
            for (std::size_t i = 0; i < R_; ++i) {
                const int bi = basis_[i];
                T s = basic_cost(i);
                if (bi < static_cast<int>(N_)) {
                    for (const auto& [t, a] : sparse_cols_[bi]) s -= a * y[t];
                } else {
                    s -= y[bi - static_cast<int>(N_)];
                }
                r[i] = s;
                worst = std::max<T>(worst, abs_val(s));
            }
            return worst;
        };
        std::vector<T> y(R_), ry(R_);
        for (std::size_t i = 0; i < R_; ++i) y[i] = basic_cost(i);
        lu_solve_t(y);
        T dres = residual_t(y, ry);
        for (int it = 0; it < 6 && dres > T(0); ++it) {
            std::vector<T> dy = ry;
            lu_solve_t(dy);
            std::vector<T> cand = y, r2(R_);
            for (std::size_t i = 0; i < R_; ++i) cand[i] += dy[i];
            const T d2 = residual_t(cand, r2);
            if (!(d2 < dres)) break;
            y = std::move(cand);
            ry = std::move(r2);
            dres = d2;
        }
        if (!std::isnan(double(dres))) {
            for (std::size_t j = 0; j < N_; ++j) {
                if (is_basic(j)) {
                    obj_[j] = T(0);
                    continue;
                }
                T rc = phase_ == 2 ? cost_[j] : T(0);
                for (const auto& [t, a] : sparse_cols_[j]) rc -= a * y[t];
                obj_[j] = rc;
            }
            const T art_cost = phase_ == 2 ? T(0) : T(1);
            T objval = T(0);
            for (std::size_t i = 0; i < R_; ++i) {
                obj_[N_ + i] = is_basic(N_ + i) ? T(0) : art_cost - y[i];
                objval += y[i] * b_orig_[i];
            }
            obj_[W_ - 1] = -objval;
            if (phase_ == 2) {
                fresh_dual_ = std::move(y);
                dual_refreshed_ = true;
            }
        }
        return true;
    }

    T& at(std::size_t i, std::size_t j) { return tab_[i * W_ + j]; }
    T& rhs(std::size_t i) { return tab_[i * W_ + W_ - 1]; }
    static T abs_val(const T& v) { return v < T(0) ? T(-v) : v; }

    T phase1_threshold() const {
        if constexpr (simplex_traits<T>::exact) return T(0);
        T scale = T(1);
        for (std::size_t i = 0; i < R_; ++i) scale = std::max<T>(scale, abs_val(tab_[i * W_ + W_ - 1]));
        return simplex_traits<T>::eps_feas() * scale;
    }

    // Threshold for declaring real infeasibility (basic artificials carrying
    // mass). Sits above the residual the expanding-tolerance ratio test is
    // allowed to leave behind, so expansion artifacts are not mistaken for
    // infeasible rows.
    T feas_threshold() const {
        if constexpr (simplex_traits<T>::exact) return T(0);
        return T(1e-8) * bscale_;
    }

    bool is_basic(std::size_t j) const { return in_basis_[j] != 0; }

    // Returns false when the phase detects an unbounded direction (phase 2
    // only); the offending entering column is reported through `entering`.
    bool run(std::size_t* entering_out = nullptr) {
        const T eps_rc = simplex_traits<T>::eps_rc();
        std::size_t stall = 0;
        T last_obj = obj_[W_ - 1];
        const std::size_t stall_limit = 200 + 4 * R_;
        blocked_.assign(N_ + R_, 0);
        bool any_blocked = false;
        // expanding-tolerance state: every pivot moves the entering variable
        // by at least tau, and basic variables may dip delta below zero
        const T tau = simplex_traits<T>::exact ? T(0) : T(1e-12) * bscale_;
        const T delta_cap = T(1e-9) * bscale_;
        T delta = tau;
        std::size_t iter = 0;
        for (;; ++iter) {
#ifdef SOT_LP_DEBUG_REFRESH
            if (iter > 0 && iter % 100000 == 0)
                std::fprintf(stderr, "[run] phase=%d iter=%zu R=%zu N=%zu obj=%.12e bland=%d\n",
                             phase_, iter, R_, N_, double(obj_[W_ - 1]), int(use_bland_));
#endif
            const std::size_t limit = phase_ == 1 ? N_ + R_ : N_;
            std::size_t enter = limit;
            if (use_bland_) {
                for (std::size_t j = 0; j < limit; ++j) {
                    if (banned_artificial(j) || blocked_[j]) continue;
                    if (obj_[j] < -eps_rc && !is_basic(j)) {
                        enter = j;
                        break;
                    }
                }
            } else {
                T best = -eps_rc;
                for (std::size_t j = 0; j < limit; ++j) {
                    if (banned_artificial(j) || blocked_[j]) continue;
                    if (obj_[j] < best && !is_basic(j)) {
                        best = obj_[j];
                        enter = j;
                    }
                }
            }
            if (enter == limit) {
#ifdef SOT_LP_DEBUG_REFRESH
                if (iter > 100)
                    std::fprintf(stderr, "[run done] phase=%d iters=%zu R=%zu N=%zu\n", phase_,
                                 iter, R_, N_);
#endif
                return true;  // phase optimal
            }

            // Two-pass ratio test with an expanding feasibility tolerance.
            // Pass 1 finds the most restrictive ratio measured against rhs
            // relaxed by `delta`; pass 2 picks, among the rows whose true
            // ratio fits under that bound, the largest pivot entry
            // (numerical stability). Forcing every step to be at least `tau`
            // makes the objective strictly decrease each pivot, so no basis
            // can ever repeat (cycling is impossible); the tiny infeasibility
            // this and `delta` admit is wiped by the periodic basis refresh.
            const T rhs_zero = phase1_threshold();
            // The leaving pivot must stand clearly above tableau noise: on
            // degenerate rows (rhs = 0) a noise-level entry wins the ratio
            // test at ratio 0 and pivots the basis into singularity, after
            // which no refresh can save the run.
            const T pivot_tol = simplex_traits<T>::exact ? T(0) : T(1e-9);
            const T art_pivot = simplex_traits<T>::exact ? T(0) : T(1e-5);
            bool saw_tiny_pivot = false, have = false;
            T theta{};
            // eligibility: regular rows need a > pivot_tol; rows whose
            // artificial sits at zero level accept either pivot sign (the
            // artificial leaves at ratio 0 and can never rise above zero)
            // but need |a| > art_pivot: smaller entries are noise on a
            // dependent row and pivoting on them corrupts the basis.
            const auto classify = [&](std::size_t i, T& a_eff, T& true_ratio) {
                const T a = at(i, enter);
                if (basis_[i] >= static_cast<int>(N_) && abs_val(rhs(i)) <= rhs_zero) {
                    rhs(i) = T(0);  // the residual is noise below tolerance
                    if (abs_val(a) <= art_pivot) return false;
                    a_eff = abs_val(a);
                    true_ratio = T(0);
                    return true;
                }
                if (a <= pivot_tol) {
                    if (a > simplex_traits<T>::eps_pivot()) saw_tiny_pivot = true;
                    return false;
                }
                a_eff = a;
                true_ratio = rhs(i) < T(0) ? T(0) : rhs(i) / a;
                return true;
            };
            for (std::size_t i = 0; i < R_; ++i) {
                if (!active_[i]) continue;
                T a_eff, r0;
                if (!classify(i, a_eff, r0)) continue;
                T expanded = (rhs(i) + delta) / a_eff;
                if (expanded < T(0)) expanded = T(0);
                if (!have || expanded < theta) {
                    have = true;
                    theta = expanded;
                }
            }
            if (!have) {
                if (saw_tiny_pivot) {
                    // every candidate pivot is noise: the column is (near-)
                    // dependent on the basis and cannot enter stably. Set it
                    // aside; a later basis change may make it usable again.
                    blocked_[enter] = 1;
                    any_blocked = true;
                    continue;
                }
                if (entering_out) *entering_out = enter;
                return false;  // unbounded
            }
            std::size_t leave = R_;
            T best_a{};
            for (std::size_t i = 0; i < R_; ++i) {
                if (!active_[i]) continue;
                T a_eff, r0;
                if (!classify(i, a_eff, r0)) continue;
                if (r0 > theta) continue;
                if constexpr (simplex_traits<T>::exact) {
                    // exact mode runs Bland's rule: smallest basis index
                    if (leave == R_ || basis_[i] < basis_[leave]) leave = i;
                } else {
                    if (leave == R_ || a_eff > best_a) {
                        leave = i;
                        best_a = a_eff;
                    }
                }
            }
            if constexpr (!simplex_traits<T>::exact) {
                // enforce the minimum step: the entering variable must rise
                // by at least tau, even on a degenerate row
                const T a_leave = at(leave, enter);
                if (rhs(leave) < tau * abs_val(a_leave)) rhs(leave) = tau * a_leave;
            }
            pivot(leave, enter);
            if (any_blocked) {
                blocked_.assign(N_ + R_, 0);
                any_blocked = false;
            }
            if constexpr (!simplex_traits<T>::exact) {
                delta += tau;
                if (delta > delta_cap) {
                    refresh_basis_solution();
                    delta = tau;
                }
            }

            if (!use_bland_) {
                if (obj_[W_ - 1] >= last_obj - simplex_traits<T>::eps_rc()) {
                    if (++stall > stall_limit) use_bland_ = true;
                } else {
                    stall = 0;
                    last_obj = obj_[W_ - 1];
                }
            }
        }
    }

    // An artificial may never re-enter the basis once it has left.
    bool banned_artificial(std::size_t j) const {
        return j >= N_ && basis_[j - N_] != static_cast<int>(j);
    }

    void pivot(std::size_t row, std::size_t col) {
        const T p = at(row, col);
        if (abs_val(p) <= simplex_traits<T>::eps_pivot())
            throw NumericalBreakdownError("pivot magnitude below threshold");
        const T inv = T(1) / p;
        // transport-style bases keep the pivot row sparse; touching only its
        // nonzeros makes the rank-one update proportional to that sparsity
        pivot_nz_.clear();
        for (std::size_t j = 0; j < W_; ++j) {
            if (at(row, j) == T(0)) continue;
            at(row, j) *= inv;
            pivot_nz_.push_back(j);
        }
        at(row, col) = T(1);
        const T* prow = &tab_[row * W_];
        const bool sparse_row = 2 * pivot_nz_.size() < W_;
        for (std::size_t i = 0; i < R_; ++i) {
            if (i == row) continue;
            const T f = at(i, col);
            if (f == T(0)) continue;
            T* irow = &tab_[i * W_];
            if (sparse_row) {
                for (const std::size_t j : pivot_nz_) irow[j] -= f * prow[j];
            } else {
                for (std::size_t j = 0; j < W_; ++j) irow[j] -= f * prow[j];
            }
            at(i, col) = T(0);
        }
        const T f = obj_[col];
        if (f != T(0)) {
            if (sparse_row) {
                for (const std::size_t j : pivot_nz_) obj_[j] -= f * prow[j];
            } else {
                for (std::size_t j = 0; j < W_; ++j) obj_[j] -= f * prow[j];
            }
            obj_[col] = T(0);
        }
        in_basis_[basis_[row]] = 0;
        in_basis_[col] = 1;
        basis_[row] = static_cast<int>(col);
        ++pivots_since_refresh_;
    }

    void check_residual(const LPSolutionT<T>& sol) const {
        T worst = T(0);
        for (std::size_t j = 0; j < N_; ++j)
            if (sol.primal[j] < T(0)) worst = std::max<T>(worst, -sol.primal[j]);
        if (worst > T(1e-6)) throw NumericalBreakdownError("negative basic value at optimum");
    }

    std::size_t R_, N_, W_;
    std::vector<T> tab_;
    std::vector<T> cost_;
    std::vector<T> obj_;
    std::vector<int> basis_;
    std::vector<char> in_basis_;
    std::vector<char> blocked_;  // columns set aside by run() as unpivotable
    std::vector<std::size_t> pivot_nz_;  // scratch: nonzero columns of the pivot row
    std::vector<bool> flip_;
    std::vector<bool> active_;
    // original column data (flipped row space) backing the basis refresh
    std::vector<std::vector<std::pair<std::size_t, T>>> sparse_cols_;
    std::vector<T> b_orig_;
    std::vector<T> fresh_dual_;
    T bscale_{};
    bool dual_refreshed_ = false;
    std::size_t pivots_since_refresh_ = 0;
    int phase_ = 1;
    bool use_bland_ = false;
};

}  // namespace detail

inline LPSolution solve(const LinearProgram& lp) {
    detail::SimplexTableau<double> tab(lp);
    return tab.solve();
}

inline LPSolutionT<Rational> solve_exact(const LinearProgramT<Rational>& lp) {
    detail::SimplexTableau<Rational> tab(lp);
    return tab.solve();
}

/// Exact view of a floating LP (every double is a dyadic rational).
inline LinearProgramT<Rational> exact_from(const LinearProgram& lp) {
    LinearProgramT<Rational> out;
    out.rows = lp.rows;
    out.cols = lp.cols;
    out.objective.assign(lp.objective.begin(), lp.objective.end());
    out.A.assign(lp.A.begin(), lp.A.end());
    out.b.assign(lp.b.begin(), lp.b.end());
    return out;
}

namespace detail {

// Row echelon pass; returns the indices of a maximal independent row set, or
// nullopt when the system 0 = nonzero turns up (no solutions at all).
inline std::optional<std::vector<std::size_t>> independent_rows(const LinearProgram& lp,
                                                                double tol = 1e-11) {
    std::size_t R = lp.rows, N = lp.cols;
    std::vector<std::vector<double>> M(R, std::vector<double>(N + 1));
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < N; ++j) M[i][j] = lp.at(i, j);
        M[i][N] = lp.b[i];
    }
    std::vector<std::size_t> order(R);
    for (std::size_t i = 0; i < R; ++i) order[i] = i;
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < N && row < R; ++col) {
        std::size_t best = row;
        for (std::size_t i = row + 1; i < R; ++i)
            if (std::abs(M[i][col]) > std::abs(M[best][col])) best = i;
        if (std::abs(M[best][col]) <= tol) continue;
        std::swap(M[row], M[best]);
        std::swap(order[row], order[best]);
        for (std::size_t i = row + 1; i < R; ++i) {
            const double f = M[i][col] / M[row][col];
            if (f == 0.0) continue;
            for (std::size_t j = col; j <= N; ++j) M[i][j] -= f * M[row][j];
        }
        pivots.push_back(order[row]);
        ++row;
    }
    for (std::size_t i = row; i < R; ++i)
        if (std::abs(M[i][N]) > 1e-8) return std::nullopt;
    return pivots;
}

inline bool gauss_solve(std::vector<std::vector<double>>& M, std::vector<double>& x,
                        double tol = 1e-11) {
    const std::size_t n = x.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t best = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(M[i][col]) > std::abs(M[best][col])) best = i;
        if (std::abs(M[best][col]) <= tol) return false;
        std::swap(M[col], M[best]);
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col) continue;
            const double f = M[i][col] / M[col][col];
            if (f == 0.0) continue;
            for (std::size_t j = col; j <= n; ++j) M[i][j] -= f * M[col][j];
        }
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = M[i][n] / M[i][i];
    return true;
}

}  // namespace detail

/// All basic feasible points of {Ax = b, x >= 0}, deduplicated. Brute-force
/// oracle for small instances only.
inline std::vector<std::vector<double>> vertex_enumerate(const LinearProgram& lp,
                                                         std::size_t max_vertices = 4096,
                                                         const Tolerances& tol = {}) {
    if (lp.cols > 24 || lp.rows > 16) throw TooLargeError("vertex enumeration caps: N<=24, R<=16");
    auto rows = detail::independent_rows(lp);
    if (!rows) return {};
    const std::size_t r = rows->size();
    std::vector<std::vector<double>> vertices;
    if (r == 0) {
        // Only x = 0 can be basic when A has rank zero.
        vertices.push_back(std::vector<double>(lp.cols, 0.0));
        return vertices;
    }
    std::vector<std::size_t> comb(r);
    for (std::size_t i = 0; i < r; ++i) comb[i] = i;
    const std::size_t N = lp.cols;
    for (;;) {
        std::vector<std::vector<double>> M(r, std::vector<double>(r + 1));
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < r; ++j) M[i][j] = lp.at((*rows)[i], comb[j]);
            M[i][r] = lp.b[(*rows)[i]];
        }
        std::vector<double> xb(r);
        if (detail::gauss_solve(M, xb)) {
            bool ok = true;
            for (double v : xb)
                if (v < -tol.feas) { ok = false; break; }
            if (ok) {
                std::vector<double> x(N, 0.0);
                for (std::size_t j = 0; j < r; ++j) x[comb[j]] = std::max(0.0, xb[j]);
                // Full-system check (dependent rows included).
                for (std::size_t i = 0; i < lp.rows && ok; ++i) {
                    double s = -lp.b[i];
                    for (std::size_t j = 0; j < N; ++j) s += lp.at(i, j) * x[j];
                    if (std::abs(s) > 1e-7) ok = false;
                }
                if (ok) {
                    bool dup = false;
                    for (const auto& v : vertices) {
                        double d = 0.0;
                        for (std::size_t j = 0; j < N; ++j) d = std::max(d, std::abs(v[j] - x[j]));
                        if (d <= 1e-9) { dup = true; break; }
                    }
                    if (!dup) {
                        vertices.push_back(std::move(x));
                        if (vertices.size() > max_vertices)
                            throw TooLargeError("vertex count exceeds max_vertices");
                    }
                }
            }
        }
        // next combination
        std::size_t k = r;
        while (k > 0 && comb[k - 1] == N - r + (k - 1)) --k;
        if (k == 0) break;
        ++comb[k - 1];
        for (std::size_t i = k; i < r; ++i) comb[i] = comb[i - 1] + 1;
    }
    return vertices;
}

}  // namespace sot
