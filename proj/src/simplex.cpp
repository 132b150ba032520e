#include "pwh/simplex.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace pwh {

std::string lp_status_name(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
        default: return "numerical_failure";
    }
}

namespace {

// Dense tableau over columns [x (n) | artificial (m)] plus the right-hand side.
struct Tableau {
    int m, n, w;  // w = n + m
    std::vector<double> t;  // m x (w + 1)
    std::vector<double> d;  // reduced costs, w + 1 (last entry: -objective)
    std::vector<int> basis;

    double& at(int i, int j) { return t[static_cast<size_t>(i) * (w + 1) + j]; }
    double rhs(int i) const { return t[static_cast<size_t>(i) * (w + 1) + w]; }

    void pivot(int r, int q) {
        const double pv = at(r, q);
        for (int j = 0; j <= w; ++j) at(r, j) /= pv;
        at(r, q) = 1.0;
        for (int i = 0; i < m; ++i) {
            if (i == r) continue;
            const double f = at(i, q);
            if (f == 0.0) continue;
            for (int j = 0; j <= w; ++j) at(i, j) -= f * at(r, j);
            at(i, q) = 0.0;
        }
        const double f = d[q];
        if (f != 0.0) {
            for (int j = 0; j <= w; ++j) d[j] -= f * at(r, j);
            d[q] = 0.0;
        }
        basis[r] = q;
    }

    // Dantzig pricing, switching to Bland's rule after a run of degenerate
    // pivots so that cycling cannot persist. Returns Optimal, Unbounded or
    // NumericalFailure (iteration cap).
    LpStatus run(int ncols, int& iters, int max_iters, double tol) {
        int degenerate = 0;
        while (true) {
            const bool bland = degenerate > 50;
            int q = -1;
            double most = -tol;
            for (int j = 0; j < ncols; ++j) {
                if (d[j] >= most) continue;
                q = j;
                if (bland) break;
                most = d[j];
            }
            if (q < 0) return LpStatus::Optimal;
            if (++iters > max_iters) return LpStatus::NumericalFailure;
            int r = -1;
            double best = 0.0;
            for (int i = 0; i < m; ++i) {
                const double a = at(i, q);
                if (a <= tol) continue;
                const double ratio = rhs(i) / a;
                if (r < 0 || ratio < best - 1e-12 || (std::abs(ratio - best) <= 1e-12 && basis[i] < basis[r])) {
                    r = i;
                    best = ratio;
                }
            }
            if (r < 0) return LpStatus::Unbounded;
            degenerate = best <= 1e-12 ? degenerate + 1 : 0;
            pivot(r, q);
        }
    }
};

}  // namespace

namespace {

// With `perturb`, the right-hand side is shifted by tiny distinct amounts to
// break degeneracy; the basic solution is then recomputed from the exact
// right-hand side and rejected (empty optional) if it is not feasible.
std::optional<StandardResult> solve_impl(const StandardLp& lp, int max_iterations, double tol, bool perturb) {
    const int m = lp.m, n = lp.n;
    if (static_cast<int>(lp.A.size()) != m * n || static_cast<int>(lp.b.size()) != m ||
        static_cast<int>(lp.c.size()) != n)
        throw std::invalid_argument("simplex: inconsistent LP dimensions");
    double bscale = 1.0;
    for (double v : lp.b) bscale = std::max(bscale, std::abs(v));
    StandardResult res;
    Tableau T{m, n, n + m, {}, {}, {}};
    T.t.assign(static_cast<size_t>(m) * (T.w + 1), 0.0);
    T.d.assign(T.w + 1, 0.0);
    T.basis.resize(m);
    std::vector<double> sign(m, 1.0);
    for (int i = 0; i < m; ++i) {
        if (lp.b[i] < 0.0) sign[i] = -1.0;
        for (int j = 0; j < n; ++j) T.at(i, j) = sign[i] * lp.A[static_cast<size_t>(i) * n + j];
        T.at(i, n + i) = 1.0;
        T.at(i, T.w) = sign[i] * lp.b[i];
        if (perturb) T.at(i, T.w) += 1e-7 * bscale * (1.0 + ((i * 7919) % 997) / 997.0);
        T.basis[i] = n + i;
    }

    // Phase 1: minimize the sum of artificials.
    for (int j = 0; j <= T.w; ++j) {
        if (j >= n && j < T.w) continue;
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += T.at(i, j);
        T.d[j] = -s;
    }
    int iters = 0;
    LpStatus st = T.run(n, iters, max_iterations, tol);
    res.iterations = iters;
    if (st == LpStatus::NumericalFailure) {
        res.status = st;
        res.diagnostics = "iteration cap reached in phase 1 after " + std::to_string(iters) + " pivots";
        return res;
    }
    if (perturb) {
        // Exact basic values from B^-1, which sits in the artificial columns.
        for (int r = 0; r < m; ++r) {
            double v = 0.0;
            for (int i = 0; i < m; ++i) v += T.at(r, n + i) * sign[i] * lp.b[i];
            T.at(r, T.w) = v;
        }
        double resid = 0.0;
        for (int r = 0; r < m; ++r) {
            if (T.rhs(r) < -1e-9 * bscale) return std::nullopt;
            if (T.basis[r] >= n) resid += T.rhs(r);
        }
        if (resid > 1e-9 * bscale) return std::nullopt;
        for (int r = 0; r < m; ++r) T.at(r, T.w) += 1e-7 * bscale * (1.0 + ((r * 7919) % 997) / 997.0);
    } else if (-T.d[T.w] > 1e-9 * bscale) {
        res.status = LpStatus::Infeasible;
        res.diagnostics = "phase 1 residual " + std::to_string(-T.d[T.w]);
        return res;
    }

    // Drive zero-level artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
        if (T.basis[i] < n) continue;
        int q = -1;
        double best = 0.0;
        for (int j = 0; j < n; ++j)
            if (std::abs(T.at(i, j)) > std::max(best, 1e-9)) {
                best = std::abs(T.at(i, j));
                q = j;
            }
        if (q >= 0) {
            T.pivot(i, q);
        } else {
            for (int j = 0; j < n; ++j) T.at(i, j) = 0.0;  // redundant row
            T.at(i, T.w) = 0.0;
        }
    }

    // Phase 2 reduced costs over all columns; artificials carry cost 0 but
    // may not re-enter.
    for (int j = 0; j <= T.w; ++j) {
        double cj = j < n ? lp.c[j] : 0.0;
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
            const int bi = T.basis[i];
            const double cb = bi < n ? lp.c[bi] : 0.0;
            if (cb != 0.0) s += cb * T.at(i, j);
        }
        T.d[j] = (j == T.w ? 0.0 : cj) - s;
    }
    st = T.run(n, iters, max_iterations, tol);
    res.iterations = iters;
    res.status = st;
    if (st == LpStatus::NumericalFailure) {
        res.diagnostics = "iteration cap reached in phase 2 after " + std::to_string(iters) + " pivots";
        return res;
    }
    if (st == LpStatus::Unbounded) {
        res.diagnostics = "objective unbounded below";
        return res;
    }
    if (perturb) {
        for (int r = 0; r < m; ++r) {
            double v = 0.0;
            for (int i = 0; i < m; ++i) v += T.at(r, n + i) * sign[i] * lp.b[i];
            if (v < -1e-9 * bscale || (T.basis[r] >= n && std::abs(v) > 1e-9 * bscale)) return std::nullopt;
            T.at(r, T.w) = std::max(v, 0.0);
        }
    }
    res.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i)
        if (T.basis[i] < n) res.x[T.basis[i]] = T.rhs(i);
    res.objective = 0.0;
    for (int j = 0; j < n; ++j) res.objective += lp.c[j] * res.x[j];
    res.duals.resize(m);
    for (int i = 0; i < m; ++i) res.duals[i] = -T.d[n + i] * sign[i];
    return res;
}

}  // namespace

StandardResult solve_standard(const StandardLp& lp, int max_iterations, double tol) {
    if (static_cast<int>(lp.A.size()) != lp.m * lp.n || static_cast<int>(lp.b.size()) != lp.m ||
        static_cast<int>(lp.c.size()) != lp.n)
        throw std::invalid_argument("simplex: inconsistent LP dimensions");
    if (max_iterations <= 0) max_iterations = 50 * (lp.m + lp.n) + 1000;
    if (auto r = solve_impl(lp, max_iterations, tol, true); r && r->status == LpStatus::Optimal) return *r;
    return *solve_impl(lp, max_iterations, tol, false);
}

LpResult simplex_solve(const Lp& lp, int max_iterations) {
    const int nv = static_cast<int>(lp.c.size());
    const int nr = static_cast<int>(lp.rows.size());
    if (static_cast<int>(lp.b.size()) != nr) throw std::invalid_argument("simplex: rows and b differ in length");
    const double inf = std::numeric_limits<double>::infinity();
    auto lo = [&](int j) { return lp.lower.empty() ? -inf : lp.lower[j]; };
    auto hi = [&](int j) { return lp.upper.empty() ? inf : lp.upper[j]; };

    // x_j = shift_j + sum over its standard columns of (coef * z).
    struct Map {
        double shift = 0.0;
        std::vector<std::pair<int, double>> cols;
    };
    std::vector<Map> map(nv);
    int nz = 0;
    std::vector<std::pair<int, double>> upper_rows;  // (column, bound) meaning z_col <= bound
    for (int j = 0; j < nv; ++j) {
        const double l = lo(j), u = hi(j);
        if (l > u) {
            LpResult r;
            r.status = LpStatus::Infeasible;
            r.diagnostics = "variable " + std::to_string(j) + " has lower > upper";
            return r;
        }
        if (std::isfinite(l)) {
            map[j].shift = l;
            map[j].cols.push_back({nz, 1.0});
            if (std::isfinite(u)) upper_rows.push_back({nz, u - l});
            ++nz;
        } else if (std::isfinite(u)) {
            map[j].shift = u;
            map[j].cols.push_back({nz++, -1.0});
        } else {
            map[j].cols.push_back({nz++, 1.0});
            map[j].cols.push_back({nz++, -1.0});
        }
    }
    const int m = nr + static_cast<int>(upper_rows.size());
    const int n = nz + m;  // one slack or surplus per row
    StandardLp s;
    s.m = m;
    s.n = n;
    s.A.assign(static_cast<size_t>(m) * n, 0.0);
    s.b.assign(m, 0.0);
    s.c.assign(n, 0.0);
    for (int j = 0; j < nv; ++j)
        for (auto [col, f] : map[j].cols) s.c[col] += lp.c[j] * f;
    for (int i = 0; i < nr; ++i) {
        if (static_cast<int>(lp.rows[i].size()) != nv) throw std::invalid_argument("simplex: row length mismatch");
        double rhs = lp.b[i];
        for (int j = 0; j < nv; ++j) {
            const double a = lp.rows[i][j];
            rhs -= a * map[j].shift;
            for (auto [col, f] : map[j].cols) s.A[static_cast<size_t>(i) * n + col] += a * f;
        }
        s.A[static_cast<size_t>(i) * n + nz + i] = -1.0;
        s.b[i] = rhs;
    }
    for (size_t k = 0; k < upper_rows.size(); ++k) {
        const int i = nr + static_cast<int>(k);
        s.A[static_cast<size_t>(i) * n + upper_rows[k].first] = 1.0;
        s.A[static_cast<size_t>(i) * n + nz + i] = 1.0;
        s.b[i] = upper_rows[k].second;
    }

    auto sr = solve_standard(s, max_iterations);
    LpResult r;
    r.status = sr.status;
    r.iterations = sr.iterations;
    r.diagnostics = sr.diagnostics;
    if (sr.status != LpStatus::Optimal) return r;
    r.x.assign(nv, 0.0);
    for (int j = 0; j < nv; ++j) {
        r.x[j] = map[j].shift;
        for (auto [col, f] : map[j].cols) r.x[j] += f * sr.x[col];
    }
    r.objective = 0.0;
    for (int j = 0; j < nv; ++j) r.objective += lp.c[j] * r.x[j];
    return r;
}

}  // namespace pwh
