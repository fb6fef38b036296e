#include "cmpg/equilibrium.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "cmpg/csa.hpp"
#include "cmpg/lp.hpp"

namespace cmpg {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Exact value of a deterministic or stochastic single-agent policy in an
/// induced MDP for an arbitrary payoff.
VectorXd induced_policy_value(const InducedCmdp& mdp, const std::vector<int>& det_policy,
                              const std::vector<double>& payoff) {
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    MatrixXd lhs = MatrixXd::Identity(S, S);
    VectorXd r(S);
    for (int s = 0; s < S; ++s) {
        int a = det_policy[s];
        size_t idx = static_cast<size_t>(s) * A + a;
        r(s) = payoff[idx];
        const double* row = mdp.kernel.data() + idx * S;
        for (int t = 0; t < S; ++t) lhs(s, t) -= row[t];
    }
    Eigen::FullPivLU<MatrixXd> lu(lhs);
    if (!lu.isInvertible()) throw SingularSystemError("induced MDP policy evaluation is singular");
    return lu.solve(r);
}

/// Exact minimizing deterministic policy for a scalar payoff via policy
/// iteration (finite and exact at this scale).
std::vector<int> solve_induced_min(const InducedCmdp& mdp, const std::vector<double>& payoff) {
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    std::vector<int> policy(S, 0);
    auto q_value = [&](int s, int a, const VectorXd& v) {
        size_t idx = static_cast<size_t>(s) * A + a;
        double q = payoff[idx];
        const double* row = mdp.kernel.data() + idx * S;
        for (int t = 0; t < S; ++t) q += row[t] * v(t);
        return q;
    };
    for (int iter = 0; iter < 1000; ++iter) {
        VectorXd v = induced_policy_value(mdp, policy, payoff);
        bool stable = true;
        for (int s = 0; s < S; ++s) {
            int best = policy[s];
            double best_q = q_value(s, best, v);
            for (int a = 0; a < A; ++a) {
                double q = q_value(s, a, v);
                if (q < best_q - 1e-12) {  // strict improvement, ties keep current
                    best = a;
                    best_q = q;
                }
            }
            if (best != policy[s]) {
                policy[s] = best;
                stable = false;
            }
        }
        if (stable) return policy;
    }
    return policy;
}

double initial_value(const InducedCmdp& mdp, const VectorXd& v) {
    double out = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) out += mdp.initial_dist[s] * v(s);
    return out;
}

}  // namespace

InducedCmdp marginalize(const GameSpec& spec, const JointPolicy& policy, int agent) {
    if (spec.horizon != HorizonMode::kRandomStopping)
        throw UnsupportedModeError("induced CMDP requires random stopping");
    const int S = spec.num_states;
    const int m = spec.num_agents;
    const long long A = spec.joint_actions();
    const int Ai = spec.action_counts[agent];

    InducedCmdp mdp;
    mdp.num_states = S;
    mdp.num_actions = Ai;
    mdp.reward.assign(static_cast<size_t>(S) * Ai, 0.0);
    mdp.cost.assign(static_cast<size_t>(S) * Ai, 0.0);
    mdp.kernel.assign(static_cast<size_t>(S) * Ai * S, 0.0);
    mdp.initial_dist = spec.initial_dist;
    mdp.threshold = spec.threshold;

    std::vector<int> digits(m);
    JointActionIndexer ix = spec.indexer();
    for (int s = 0; s < S; ++s) {
        for (long long a = 0; a < A; ++a) {
            ix.decode(static_cast<int>(a), digits);
            double others = 1.0;
            for (int j = 0; j < m; ++j)
                if (j != agent) others *= policy.agents[j].at(s, digits[j]);
            if (others == 0.0) continue;
            size_t src = static_cast<size_t>(s) * A + a;
            size_t dst = static_cast<size_t>(s) * Ai + digits[agent];
            mdp.reward[dst] += others * spec.rewards[agent][src];
            mdp.cost[dst] += others * spec.cost[src];
            const double* row = spec.transitions.data() + src * S;
            double* out = mdp.kernel.data() + dst * S;
            for (int t = 0; t < S; ++t) out[t] += others * row[t];
        }
    }
    return mdp;
}

BestResponse best_response_feasible_value(const GameSpec& spec_in, const JointPolicy& policy,
                                          int agent) {
    GameSpec spec = normalized_to_minimize(spec_in);
    InducedCmdp mdp = marginalize(spec, policy, agent);
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const int n_occ = S * A;
    const bool constrained = std::isfinite(mdp.threshold);
    const int n = n_occ + (constrained ? 1 : 0);  // occupancy + cost slack

    LpProblem lp;
    lp.num_vars = n;
    lp.objective.assign(n, 0.0);
    for (int i = 0; i < n_occ; ++i) lp.objective[i] = mdp.reward[i];

    // Flow conservation per target state.
    for (int t = 0; t < S; ++t) {
        std::vector<double> row(n, 0.0);
        for (int a = 0; a < A; ++a) row[t * A + a] += 1.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                row[s * A + a] -= mdp.kernel[(static_cast<size_t>(s) * A + a) * S + t];
        lp.eq_lhs.push_back(std::move(row));
        lp.eq_rhs.push_back(mdp.initial_dist[t]);
    }
    if (constrained) {
        std::vector<double> row(n, 0.0);
        for (int i = 0; i < n_occ; ++i) row[i] = mdp.cost[i];
        row[n_occ] = 1.0;
        lp.eq_lhs.push_back(std::move(row));
        lp.eq_rhs.push_back(mdp.threshold);
    }

    LpResult sol = solve_lp(lp);
    BestResponse br;
    if (sol.status != LpResult::Status::kOptimal) {
        br.feasible = false;
        return br;
    }
    br.feasible = true;
    br.value = sol.value;
    br.occupancy.assign(sol.x.begin(), sol.x.begin() + n_occ);
    br.cost_value = 0.0;
    for (int i = 0; i < n_occ; ++i) br.cost_value += mdp.cost[i] * br.occupancy[i];

    br.policy = Table(S, A, 0.0);
    for (int s = 0; s < S; ++s) {
        double total = 0.0;
        for (int a = 0; a < A; ++a) total += br.occupancy[s * A + a];
        if (total > 1e-12) {
            for (int a = 0; a < A; ++a) br.policy.at(s, a) = br.occupancy[s * A + a] / total;
        } else {
            for (int a = 0; a < A; ++a) br.policy.at(s, a) = 1.0 / A;  // unreached state
        }
    }
    if (spec_in.objective == Objective::kMaximize) br.value = -br.value;
    return br;
}

BestResponse best_response_dual_bisection(const GameSpec& spec_in, const JointPolicy& policy,
                                          int agent) {
    GameSpec spec = normalized_to_minimize(spec_in);
    InducedCmdp mdp = marginalize(spec, policy, agent);
    const int n = mdp.num_states * mdp.num_actions;
    const double alpha = mdp.threshold;

    auto scalarized = [&](double lambda) {
        std::vector<double> payoff(n);
        for (int i = 0; i < n; ++i) payoff[i] = mdp.reward[i] + lambda * mdp.cost[i];
        return payoff;
    };
    struct Eval {
        double reward_value, cost_value, dual_value;
    };
    auto evaluate = [&](double lambda) {
        std::vector<double> payoff = scalarized(lambda);
        std::vector<int> det = solve_induced_min(mdp, payoff);
        VectorXd vr = induced_policy_value(mdp, det, mdp.reward);
        VectorXd vc = induced_policy_value(mdp, det, mdp.cost);
        Eval e;
        e.reward_value = initial_value(mdp, vr);
        e.cost_value = initial_value(mdp, vc);
        e.dual_value = e.reward_value + lambda * (e.cost_value - alpha);
        return e;
    };

    BestResponse br;
    if (!std::isfinite(alpha)) {  // unconstrained: plain MDP optimum
        Eval e0 = evaluate(0.0);
        br.feasible = true;
        br.value = e0.reward_value;
        br.cost_value = e0.cost_value;
        br.dual_lambda = 0.0;
        if (spec_in.objective == Objective::kMaximize) br.value = -br.value;
        return br;
    }

    const double cost_tol = 1e-11;
    Eval at_zero = evaluate(0.0);
    if (at_zero.cost_value <= alpha + cost_tol) {
        br.feasible = true;
        br.value = at_zero.reward_value;
        br.cost_value = at_zero.cost_value;
        br.dual_lambda = 0.0;
        if (spec_in.objective == Objective::kMaximize) br.value = -br.value;
        return br;
    }

    double lo = 0.0, hi = 1.0;
    Eval at_hi = evaluate(hi);
    int guard = 0;
    while (at_hi.cost_value > alpha + cost_tol) {
        hi *= 2.0;
        if (++guard > 60) {
            br.feasible = false;  // even near-pure cost minimization violates alpha
            return br;
        }
        at_hi = evaluate(hi);
    }

    double best_dual = std::max(at_zero.dual_value, at_hi.dual_value);
    double best_lambda = at_hi.dual_value > at_zero.dual_value ? hi : 0.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        Eval e = evaluate(mid);
        if (e.dual_value > best_dual) {
            best_dual = e.dual_value;
            best_lambda = mid;
        }
        // The dual is concave with derivative cost(pi_lambda) - alpha.
        if (e.cost_value > alpha)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
    }

    br.feasible = true;
    br.value = best_dual;
    br.cost_value = alpha;  // active at the optimum when lambda > 0
    br.dual_lambda = best_lambda;
    if (spec_in.objective == Objective::kMaximize) br.value = -br.value;
    return br;
}

EquilibriumReport nash_gap(const GameSpec& spec_in, const JointPolicy& policy) {
    GameSpec spec = normalized_to_minimize(spec_in);
    const bool flip = spec_in.objective == Objective::kMaximize;

    EquilibriumReport report;
    report.constraint_value = exact_value_cost(spec, policy).at_initial;
    report.feasible = report.constraint_value <= spec.threshold + 1e-9;

    report.nash_gap = 0.0;
    for (int i = 0; i < spec.num_agents; ++i) {
        PlayerEval pe;
        double own = exact_value_reward(spec, policy, i).at_initial;
        BestResponse br = best_response_feasible_value(spec, policy, i);
        if (!br.feasible) {
            pe.status = PlayerEval::Status::kEmptyFeasibleSet;
            report.any_empty_feasible_set = true;
            pe.value = flip ? -own : own;
            report.players.push_back(pe);
            continue;
        }
        pe.value = flip ? -own : own;
        pe.best_response_value = flip ? -br.value : br.value;
        pe.exploitability = own - br.value;  // minimization orientation, >= 0
        pe.dual_lambda = br.dual_lambda;
        report.players.push_back(pe);
        report.nash_gap = std::max(report.nash_gap, pe.exploitability);
    }
    return report;
}

double potential_value(const GameSpec& spec, const PotentialSpec& potential,
                       const JointPolicy& policy) {
    if (potential.phi.size() != spec.cost.size())
        throw std::invalid_argument("potential table dimensions do not match the game");
    return exact_value(spec, policy, potential.phi, "potential").at_initial;
}

JointPolicy random_policy(const GameSpec& spec, double xi, RngStream& rng) {
    JointPolicy pi;
    pi.xi = xi;
    pi.agents.reserve(spec.num_agents);
    std::vector<double> scratch;
    for (int i = 0; i < spec.num_agents; ++i) {
        Table t(spec.num_states, spec.action_counts[i], 0.0);
        for (int s = 0; s < t.rows; ++s) {
            double total = 0.0;
            for (int a = 0; a < t.cols; ++a) {
                double e = -std::log(1.0 - rng.uniform());  // Exp(1), Dirichlet(1,..,1) row
                t.at(s, a) = e;
                total += e;
            }
            for (int a = 0; a < t.cols; ++a) t.at(s, a) /= total;
            project_floored_simplex_inplace(t.row(s), t.cols, xi, scratch);
        }
        pi.agents.push_back(std::move(t));
    }
    return pi;
}

MpgVerification verify_mpg(const GameSpec& spec_raw, const PotentialSpec& potential, int trials,
                           double tol, RngStream rng) {
    if (spec_raw.horizon != HorizonMode::kRandomStopping)
        throw UnsupportedModeError("verify_mpg requires random stopping");
    const GameSpec& spec = spec_raw;  // direction-agnostic: raw differences on both sides

    MpgVerification out;
    out.trials = trials;
    RngStream draw = rng.substream("mpg-triples");
    for (int t = 0; t < trials; ++t) {
        RngStream trial = draw.substream(static_cast<uint64_t>(t));
        JointPolicy pi = random_policy(spec, 0.0, trial);
        int i = static_cast<int>(trial.next_u64() % spec.num_agents);
        JointPolicy alt = pi;
        JointPolicy fresh = random_policy(spec, 0.0, trial);
        alt.agents[i] = fresh.agents[i];

        double dv = exact_value_reward(spec, pi, i).at_initial -
                    exact_value_reward(spec, alt, i).at_initial;
        double dphi = exact_value(spec, pi, potential.phi).at_initial -
                      exact_value(spec, alt, potential.phi).at_initial;
        out.max_deviation = std::max(out.max_deviation, std::abs(dv - dphi));
    }
    out.status = out.max_deviation <= tol ? PotentialSpec::Status::kVerified
                                          : PotentialSpec::Status::kFalsified;
    return out;
}

}  // namespace cmpg
