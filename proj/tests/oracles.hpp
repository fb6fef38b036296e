#pragma once

// Test-only oracles, independent of the solver paths they check: plain
// Monte-Carlo estimation, central finite differences along feasible simplex
// directions, and exhaustive enumeration of deterministic policies.

#include <cmath>
#include <functional>
#include <vector>

#include "cmpg/game_core.hpp"
#include "cmpg/sampling.hpp"
#include "cmpg/types.hpp"

namespace cmpg::testing {

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Monte-Carlo mean of a per-episode statistic over n independent episodes.
inline McEstimate mc_episodes(const GameSpec& spec, const JointPolicy& policy, int n,
                              uint64_t seed,
                              const std::function<double(const Trajectory&)>& statistic) {
    RngStream rng = RngStream::root(seed).substream("mc-oracle");
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = statistic(sample_episode(spec, policy, rng.substream(static_cast<uint64_t>(i))));
        sum += x;
        sum2 += x * x;
    }
    McEstimate est;
    est.mean = sum / n;
    double var = std::max(0.0, sum2 / n - est.mean * est.mean);
    est.se = std::sqrt(var / (n - 1));
    return est;
}

inline McEstimate mc_value(const GameSpec& spec, const JointPolicy& policy,
                           const std::vector<double>& payoff, int n, uint64_t seed) {
    const long long A = spec.joint_actions();
    return mc_episodes(spec, policy, n, seed, [&](const Trajectory& tr) {
        double total = 0.0;
        for (int t = 0; t < tr.length(); ++t)
            total += payoff[static_cast<size_t>(tr.states[t]) * A + tr.actions[t]];
        return total;
    });
}

/// Central finite difference of the value along the renormalization
/// direction of one coordinate: d/dh V(normalize(row + h e_a)) at h = 0,
/// which equals g(s,a) - <g(s,.), row> for the exact gradient g.
inline double fd_directional(const GameSpec& spec, const JointPolicy& policy, int agent,
                             const std::vector<double>& payoff, int s, int a, double h = 1e-5) {
    auto eval = [&](double shift) {
        JointPolicy p = policy;
        Table& t = p.agents[agent];
        t.at(s, a) += shift;
        double total = 0.0;
        for (int c = 0; c < t.cols; ++c) total += t.at(s, c);
        for (int c = 0; c < t.cols; ++c) t.at(s, c) /= total;
        return exact_value(spec, p, payoff).at_initial;
    };
    return (eval(h) - eval(-h)) / (2.0 * h);
}

/// Projection of the exact gradient slice onto the same feasible direction.
inline double gradient_directional(const Table& grad, const Table& row_policy, int s, int a) {
    double mean = 0.0;
    for (int c = 0; c < grad.cols; ++c) mean += grad.at(s, c) * row_policy.at(s, c);
    return grad.at(s, a) - mean;
}

/// All deterministic policies of one agent (one action per state).
inline std::vector<Table> deterministic_tables(int states, int actions) {
    std::vector<Table> out;
    std::vector<int> choice(states, 0);
    for (;;) {
        Table t(states, actions, 0.0);
        for (int s = 0; s < states; ++s) t.at(s, choice[s]) = 1.0;
        out.push_back(std::move(t));
        int s = 0;
        for (; s < states; ++s) {
            if (++choice[s] < actions) break;
            choice[s] = 0;
        }
        if (s == states) return out;
    }
}

/// Visits every deterministic joint policy of the game.
inline void for_each_deterministic_joint(const GameSpec& spec,
                                         const std::function<void(const JointPolicy&)>& fn) {
    std::vector<std::vector<Table>> per_agent;
    for (int i = 0; i < spec.num_agents; ++i)
        per_agent.push_back(deterministic_tables(spec.num_states, spec.action_counts[i]));
    std::vector<size_t> idx(spec.num_agents, 0);
    for (;;) {
        JointPolicy pi;
        for (int i = 0; i < spec.num_agents; ++i) pi.agents.push_back(per_agent[i][idx[i]]);
        fn(pi);
        int i = 0;
        for (; i < spec.num_agents; ++i) {
            if (++idx[i] < per_agent[i].size()) break;
            idx[i] = 0;
        }
        if (i == spec.num_agents) return;
    }
}

/// Random game with independent per-agent rewards (not identical interest),
/// uniform stopping 1 - gamma and random dynamics.
inline GameSpec make_random_game(uint64_t seed, int agents, int states, int actions,
                                 double gamma, double alpha = kInfinity) {
    GameSpec spec;
    spec.num_states = states;
    spec.num_agents = agents;
    spec.action_counts.assign(agents, actions);
    spec.threshold = alpha;
    spec.horizon = HorizonMode::kRandomStopping;
    spec.objective = Objective::kMinimize;

    RngStream rng = RngStream::root(seed).substream("random-game");
    const long long A = spec.joint_actions();
    const size_t sa = static_cast<size_t>(states) * A;
    spec.stop_probs.assign(sa, 1.0 - gamma);

    spec.rewards.assign(agents, std::vector<double>(sa, 0.0));
    RngStream rr = rng.substream("rewards");
    for (auto& table : spec.rewards)
        for (double& x : table) x = rr.uniform();
    spec.cost.assign(sa, 0.0);
    RngStream rc = rng.substream("costs");
    for (double& x : spec.cost) x = rc.uniform();

    spec.initial_dist.assign(states, 0.0);
    RngStream rmu = rng.substream("initial");
    double total = 0.0;
    for (double& x : spec.initial_dist) {
        x = 0.2 + rmu.uniform();
        total += x;
    }
    for (double& x : spec.initial_dist) x /= total;

    spec.transitions.assign(sa * states, 0.0);
    RngStream rt = rng.substream("transitions");
    for (size_t row = 0; row < sa; ++row) {
        double mass = 0.0;
        double* out = spec.transitions.data() + row * states;
        for (int t = 0; t < states; ++t) {
            out[t] = 0.05 + rt.uniform();
            mass += out[t];
        }
        for (int t = 0; t < states; ++t) out[t] *= gamma / mass;
    }
    return spec;
}

/// Pearson chi-square statistic of observed counts against expected
/// probabilities (counts and probs aligned).
inline double chi_square(const std::vector<int>& counts, const std::vector<double>& probs) {
    double total = 0.0;
    for (int c : counts) total += c;
    double stat = 0.0;
    for (size_t i = 0; i < counts.size(); ++i) {
        double expected = probs[i] * total;
        double diff = counts[i] - expected;
        stat += diff * diff / expected;
    }
    return stat;
}

}  // namespace cmpg::testing
