#pragma once

#include <limits>
#include <string>
#include <vector>

namespace pwh {

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };
std::string lp_status_name(LpStatus s);

// min c.x  s.t.  A x = b, x >= 0  (A row-major, m x n)
struct StandardLp {
    int m = 0, n = 0;
    std::vector<double> A, b, c;
};

struct StandardResult {
    LpStatus status = LpStatus::NumericalFailure;
    std::vector<double> x;
    std::vector<double> duals;  // y with A^T y <= c, one per row
    double objective = 0.0;
    int iterations = 0;
    std::string diagnostics;
};

// Two-phase tableau simplex; Dantzig pricing with a Bland fallback.
StandardResult solve_standard(const StandardLp& lp, int max_iterations = 0, double tol = 1e-10);

// min c.x  s.t.  rows[i].x >= b[i],  lower <= x <= upper (bounds may be infinite)
struct Lp {
    std::vector<double> c;
    std::vector<std::vector<double>> rows;
    std::vector<double> b;
    std::vector<double> lower, upper;  // empty: free variables
};

struct LpResult {
    LpStatus status = LpStatus::NumericalFailure;
    std::vector<double> x;
    double objective = 0.0;
    int iterations = 0;
    std::string diagnostics;
};

LpResult simplex_solve(const Lp& lp, int max_iterations = 0);

}  // namespace pwh
