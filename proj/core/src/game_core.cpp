#include "cmpg/game_core.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>

namespace cmpg {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Joint action probabilities of the product policy at one state.
void joint_probs_at_state(const GameSpec& spec, const JointPolicy& policy, int s,
                          std::vector<double>& out) {
    const int m = spec.num_agents;
    const long long A = spec.joint_actions();
    out.assign(static_cast<size_t>(A), 1.0);
    // Fill by running through flat indices in radix order; the last agent
    // varies fastest, so build up products incrementally.
    std::vector<int> digits(m, 0);
    for (long long a = 0; a < A; ++a) {
        double p = 1.0;
        for (int i = 0; i < m; ++i) p *= policy.agents[i].at(s, digits[i]);
        out[static_cast<size_t>(a)] = p;
        for (int i = m - 1; i >= 0; --i) {
            if (++digits[i] < spec.action_counts[i]) break;
            digits[i] = 0;
        }
    }
}

/// Policy-averaged continuation kernel P_pi (rows sum to <= 1 - kappa_min)
/// and payoff r_pi.
void policy_kernel(const GameSpec& spec, const JointPolicy& policy,
                   const std::vector<double>& payoff, MatrixXd& p_pi, VectorXd& r_pi) {
    const int S = spec.num_states;
    const long long A = spec.joint_actions();
    p_pi.setZero(S, S);
    r_pi.setZero(S);
    std::vector<double> w;
    for (int s = 0; s < S; ++s) {
        joint_probs_at_state(spec, policy, s, w);
        for (long long a = 0; a < A; ++a) {
            double pa = w[static_cast<size_t>(a)];
            if (pa == 0.0) continue;
            size_t idx = static_cast<size_t>(s) * A + a;
            r_pi(s) += pa * payoff[idx];
            const double* row = spec.transitions.data() + idx * S;
            for (int t = 0; t < S; ++t) p_pi(s, t) += pa * row[t];
        }
    }
}

VectorXd solve_regular(const MatrixXd& lhs, const VectorXd& rhs, const char* what) {
    Eigen::FullPivLU<MatrixXd> lu(lhs);
    if (!lu.isInvertible())
        throw SingularSystemError(std::string(what) + ": system matrix is singular "
                                  "(stopping probabilities may be zero)");
    return lu.solve(rhs);
}

VectorXd fixed_horizon_values(const GameSpec& spec, const JointPolicy& policy,
                              const std::vector<double>& payoff) {
    const int S = spec.num_states;
    const long long A = spec.joint_actions();
    VectorXd v = VectorXd::Zero(S);
    VectorXd next = VectorXd::Zero(S);
    std::vector<double> w;
    for (int step = 0; step < spec.episode_len; ++step) {
        next = v;
        for (int s = 0; s < S; ++s) {
            joint_probs_at_state(spec, policy, s, w);
            double val = 0.0;
            for (long long a = 0; a < A; ++a) {
                double pa = w[static_cast<size_t>(a)];
                if (pa == 0.0) continue;
                size_t idx = static_cast<size_t>(s) * A + a;
                double cont = 0.0;
                const double* row = spec.transitions.data() + idx * S;
                for (int t = 0; t < S; ++t) cont += row[t] * next(t);
                double keep = 1.0 - spec.stop_probs[idx];
                if (keep > 0.0) cont /= keep;  // renormalized stepping kernel
                val += pa * (payoff[idx] + cont);
            }
            v(s) = val;
        }
    }
    return v;
}

}  // namespace

ValueReport exact_value(const GameSpec& spec, const JointPolicy& policy,
                        const std::vector<double>& payoff, std::string label) {
    const int S = spec.num_states;
    VectorXd v;
    if (spec.horizon == HorizonMode::kRandomStopping) {
        MatrixXd p_pi;
        VectorXd r_pi;
        policy_kernel(spec, policy, payoff, p_pi, r_pi);
        MatrixXd lhs = MatrixXd::Identity(S, S) - p_pi;
        v = solve_regular(lhs, r_pi, "exact_value");
    } else {
        v = fixed_horizon_values(spec, policy, payoff);
    }
    ValueReport report;
    report.per_state.assign(v.data(), v.data() + S);
    report.at_initial = 0.0;
    for (int s = 0; s < S; ++s) report.at_initial += spec.initial_dist[s] * v(s);
    report.payoff_label = std::move(label);
    return report;
}

ValueReport exact_value_reward(const GameSpec& spec, const JointPolicy& policy, int agent) {
    return exact_value(spec, policy, spec.rewards[agent], "reward_" + std::to_string(agent));
}

ValueReport exact_value_cost(const GameSpec& spec, const JointPolicy& policy) {
    return exact_value(spec, policy, spec.cost, "cost");
}

std::vector<double> visitation(const GameSpec& spec, const JointPolicy& policy) {
    if (spec.horizon != HorizonMode::kRandomStopping)
        throw UnsupportedModeError("visitation requires random stopping");
    const int S = spec.num_states;
    MatrixXd p_pi;
    VectorXd r_dummy;
    std::vector<double> zero(spec.cost.size(), 0.0);
    policy_kernel(spec, policy, zero, p_pi, r_dummy);
    VectorXd mu(S);
    for (int s = 0; s < S; ++s) mu(s) = spec.initial_dist[s];
    MatrixXd lhs = MatrixXd::Identity(S, S) - p_pi.transpose();
    VectorXd d = solve_regular(lhs, mu, "visitation");
    return std::vector<double>(d.data(), d.data() + S);
}

GradientTable exact_policy_gradient_all(const GameSpec& spec, const JointPolicy& policy,
                                        const std::vector<double>& payoff) {
    if (spec.horizon != HorizonMode::kRandomStopping)
        throw UnsupportedModeError("exact_policy_gradient requires random stopping");
    const int S = spec.num_states;
    const int m = spec.num_agents;
    const long long A = spec.joint_actions();

    ValueReport vr = exact_value(spec, policy, payoff);
    std::vector<double> d = visitation(spec, policy);

    GradientTable g;
    g.slices.reserve(m);
    for (int i = 0; i < m; ++i) g.slices.emplace_back(S, spec.action_counts[i], 0.0);

    // Qbar(s, i, a_i) accumulated over joint actions with prefix/suffix
    // products of the other agents' probabilities.
    std::vector<int> digits(m, 0);
    std::vector<double> prefix(m + 1, 1.0), suffix(m + 1, 1.0);
    for (int s = 0; s < S; ++s) {
        std::fill(digits.begin(), digits.end(), 0);
        for (long long a = 0; a < A; ++a) {
            size_t idx = static_cast<size_t>(s) * A + a;
            double one_step = payoff[idx];
            const double* row = spec.transitions.data() + idx * S;
            for (int t = 0; t < S; ++t) one_step += row[t] * vr.per_state[t];

            prefix[0] = 1.0;
            for (int i = 0; i < m; ++i)
                prefix[i + 1] = prefix[i] * policy.agents[i].at(s, digits[i]);
            suffix[m] = 1.0;
            for (int i = m - 1; i >= 0; --i)
                suffix[i] = suffix[i + 1] * policy.agents[i].at(s, digits[i]);

            for (int i = 0; i < m; ++i) {
                double others = prefix[i] * suffix[i + 1];
                if (others != 0.0) g.slices[i].at(s, digits[i]) += others * one_step;
            }

            for (int i = m - 1; i >= 0; --i) {
                if (++digits[i] < spec.action_counts[i]) break;
                digits[i] = 0;
            }
        }
        for (int i = 0; i < m; ++i)
            for (int ai = 0; ai < spec.action_counts[i]; ++ai) g.slices[i].at(s, ai) *= d[s];
    }
    return g;
}

Table exact_policy_gradient(const GameSpec& spec, const JointPolicy& policy,
                            const std::vector<double>& payoff, int agent) {
    return exact_policy_gradient_all(spec, policy, payoff).slices[agent];
}

TheoreticalConstants theoretical_constants(const GameSpec& spec, bool enumerate_mismatch) {
    if (spec.horizon != HorizonMode::kRandomStopping)
        throw UnsupportedModeError("theoretical_constants requires random stopping");
    const double kappa = spec.min_stop();
    if (kappa < 1e-12)
        throw std::domain_error("theoretical_constants: 1 - gamma too small, constants overflow");
    const double gamma = 1.0 - kappa;
    const int m = spec.num_agents;
    const int a_max = spec.max_actions();

    TheoreticalConstants c;
    c.gamma = gamma;
    c.m_c = std::sqrt(static_cast<double>(m) * a_max) / (kappa * kappa);
    c.l_phi = 2.0 * m * gamma * a_max / (kappa * kappa * kappa);
    if (c.l_phi <= 0.0)
        throw std::domain_error("theoretical_constants: eta undefined at gamma = 0");
    c.eta = 1.0 / (2.0 * c.l_phi);
    c.diam = std::sqrt(2.0 * m * spec.num_states);

    for (const auto& table : spec.rewards)
        for (double r : table)
            if (r < 0.0 || r > 1.0) c.unit_range_caveat = true;
    for (double x : spec.cost)
        if (x < 0.0 || x > 1.0) c.unit_range_caveat = true;

    double max_abs_sum = 0.0;
    const long long A = spec.joint_actions();
    for (size_t idx = 0; idx < spec.cost.size(); ++idx) {
        double total = 0.0;
        for (const auto& table : spec.rewards) total += std::abs(table[idx]);
        max_abs_sum = std::max(max_abs_sum, total);
    }
    c.phi_max_bound = max_abs_sum / kappa;  // payoff bound times expected length

    if (enumerate_mismatch && spec.num_states * A <= 10000) {
        // Walk all deterministic joint policies; each state independently
        // picks one joint action, A^S combinations.
        double best = 0.0;
        bool ok = true;
        long long combos = 1;
        for (int s = 0; s < spec.num_states && ok; ++s) {
            combos *= A;
            if (combos > 200000) ok = false;
        }
        if (ok) {
            std::vector<int> choice(spec.num_states, 0);
            std::vector<int> digits;
            JointActionIndexer ix = spec.indexer();
            bool more = true;
            while (more) {
                JointPolicy det;
                det.agents.reserve(m);
                for (int i = 0; i < m; ++i) det.agents.emplace_back(spec.num_states, spec.action_counts[i], 0.0);
                for (int s = 0; s < spec.num_states; ++s) {
                    ix.decode(choice[s], digits);
                    for (int i = 0; i < m; ++i) det.agents[i].at(s, digits[i]) = 1.0;
                }
                std::vector<double> d = visitation(spec, det);
                for (int s = 0; s < spec.num_states; ++s) {
                    double mu = spec.initial_dist[s];
                    if (mu > 0.0)
                        best = std::max(best, d[s] / mu);
                    else if (d[s] > 1e-12)
                        ok = false;  // unbounded ratio, no finite estimate
                }
                more = false;
                for (int s = 0; s < spec.num_states; ++s) {
                    if (++choice[s] < A) { more = true; break; }
                    choice[s] = 0;
                }
            }
            if (ok) c.d_lower_bound = best;
        }
    }
    return c;
}

}  // namespace cmpg
