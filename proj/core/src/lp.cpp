#include "cmpg/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmpg {

namespace {

constexpr double kPivotTol = 1e-10;

struct Tableau {
    int rows;          // constraints
    int cols;          // structural + artificial variables
    int num_structural;
    std::vector<double> t;  // rows x (cols + 1), last column is rhs
    std::vector<int> basis;

    double& at(int r, int c) { return t[static_cast<size_t>(r) * (cols + 1) + c]; }
    double at(int r, int c) const { return t[static_cast<size_t>(r) * (cols + 1) + c]; }
    double& rhs(int r) { return at(r, cols); }

    void pivot(int pr, int pc) {
        double piv = at(pr, pc);
        for (int c = 0; c <= cols; ++c) at(pr, c) /= piv;
        for (int r = 0; r < rows; ++r) {
            if (r == pr) continue;
            double f = at(r, pc);
            if (f == 0.0) continue;
            for (int c = 0; c <= cols; ++c) at(r, c) -= f * at(pr, c);
        }
        basis[pr] = pc;
    }
};

/// Runs the simplex on the tableau for cost vector c (size = cols).
/// allowed(j) marks columns that may enter. Returns false on unbounded.
bool run_simplex(Tableau& tab, const std::vector<double>& c,
                 const std::vector<char>& allowed) {
    for (;;) {
        // Reduced costs from scratch: r_j = c_j - c_B . column_j. The
        // problems here are tiny, so robustness wins over speed.
        int entering = -1;
        for (int j = 0; j < tab.cols; ++j) {
            if (!allowed[j]) continue;
            double rj = c[j];
            for (int r = 0; r < tab.rows; ++r) rj -= c[tab.basis[r]] * tab.at(r, j);
            if (rj < -kPivotTol) { entering = j; break; }  // Bland: first index
        }
        if (entering < 0) return true;

        int leaving = -1;
        double best_ratio = 0.0;
        for (int r = 0; r < tab.rows; ++r) {
            double a = tab.at(r, entering);
            if (a > kPivotTol) {
                double ratio = tab.rhs(r) / a;
                if (leaving < 0 || ratio < best_ratio - kPivotTol ||
                    (std::abs(ratio - best_ratio) <= kPivotTol &&
                     tab.basis[r] < tab.basis[leaving])) {
                    leaving = r;
                    best_ratio = ratio;
                }
            }
        }
        if (leaving < 0) return false;
        tab.pivot(leaving, entering);
    }
}

}  // namespace

LpResult solve_lp(const LpProblem& problem) {
    const int m = static_cast<int>(problem.eq_lhs.size());
    const int n = problem.num_vars;
    if (static_cast<int>(problem.objective.size()) != n)
        throw std::invalid_argument("objective size mismatch");

    Tableau tab;
    tab.rows = m;
    tab.cols = n + m;  // structural + one artificial per row
    tab.num_structural = n;
    tab.t.assign(static_cast<size_t>(m) * (tab.cols + 1), 0.0);
    tab.basis.resize(m);

    for (int r = 0; r < m; ++r) {
        double sign = problem.eq_rhs[r] < 0.0 ? -1.0 : 1.0;
        for (int j = 0; j < n; ++j) tab.at(r, j) = sign * problem.eq_lhs[r][j];
        tab.at(r, n + r) = 1.0;
        tab.rhs(r) = sign * problem.eq_rhs[r];
        tab.basis[r] = n + r;
    }

    // Phase 1: minimize the total artificial mass.
    std::vector<double> phase1_cost(tab.cols, 0.0);
    for (int j = n; j < tab.cols; ++j) phase1_cost[j] = 1.0;
    std::vector<char> allowed(tab.cols, 1);
    if (!run_simplex(tab, phase1_cost, allowed))
        throw std::logic_error("phase-1 simplex unbounded");

    double infeas = 0.0;
    for (int r = 0; r < m; ++r)
        if (tab.basis[r] >= n) infeas += tab.rhs(r);
    LpResult result;
    if (infeas > 1e-8) {
        result.status = LpResult::Status::kInfeasible;
        return result;
    }

    // Drive leftover artificials (basic at zero) out where possible.
    for (int r = 0; r < m; ++r) {
        if (tab.basis[r] < n) continue;
        int col = -1;
        for (int j = 0; j < n; ++j)
            if (std::abs(tab.at(r, j)) > kPivotTol) { col = j; break; }
        if (col >= 0) tab.pivot(r, col);
        // else the row is redundant; the artificial stays basic at zero and
        // is simply barred from re-entering below.
    }

    // Phase 2 over structural columns only.
    std::vector<double> phase2_cost(tab.cols, 0.0);
    for (int j = 0; j < n; ++j) phase2_cost[j] = problem.objective[j];
    for (int j = n; j < tab.cols; ++j) allowed[j] = 0;
    if (!run_simplex(tab, phase2_cost, allowed)) {
        result.status = LpResult::Status::kUnbounded;
        return result;
    }

    result.status = LpResult::Status::kOptimal;
    result.x.assign(n, 0.0);
    for (int r = 0; r < m; ++r)
        if (tab.basis[r] < n) result.x[tab.basis[r]] = tab.rhs(r);
    result.value = 0.0;
    for (int j = 0; j < n; ++j) result.value += problem.objective[j] * result.x[j];
    return result;
}

}  // namespace cmpg
