#pragma once

#include <vector>

namespace cmpg {

/// Equality-form linear program: minimize objective . x subject to
/// eq_lhs x = eq_rhs, x >= 0. Callers add their own slack variables for
/// inequalities.
struct LpProblem {
    int num_vars = 0;
    std::vector<double> objective;
    std::vector<std::vector<double>> eq_lhs;
    std::vector<double> eq_rhs;
};

struct LpResult {
    enum class Status { kOptimal, kInfeasible, kUnbounded } status = Status::kInfeasible;
    std::vector<double> x;
    double value = 0.0;
};

/// Dense two-phase primal simplex with Bland's rule. Intended for the small
/// occupancy programs of the evaluator (tens of variables), where an exact
/// and simple method beats a clever one.
LpResult solve_lp(const LpProblem& problem);

}  // namespace cmpg
