#include "cmpg/sampling.hpp"

#include <cmath>
#include <ostream>

namespace cmpg {

RngStream RngStream::substream(std::string_view name) const {
    // FNV-1a over the name, then the usual key derivation.
    uint64_t h = 0xCBF29CE484222325ull;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return substream(h);
}

int RngStream::categorical(const double* weights, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += weights[i];
    double u = uniform() * total;
    double cum = 0.0;
    for (int i = 0; i < n; ++i) {
        cum += weights[i];
        if (u < cum) return i;
    }
    return n - 1;
}

namespace {

int sample_row(const double* p, int n, double u) {
    double cum = 0.0;
    for (int i = 0; i < n; ++i) {
        cum += p[i];
        if (u < cum) return i;
    }
    return n - 1;
}

}  // namespace

Trajectory sample_episode(const GameSpec& spec, const JointPolicy& policy, RngStream rng) {
    RngStream env = rng.substream("env");
    std::vector<RngStream> agent_rng;
    agent_rng.reserve(spec.num_agents);
    for (int i = 0; i < spec.num_agents; ++i) agent_rng.push_back(rng.substream("agent", i));

    const int S = spec.num_states;
    const long long A = spec.joint_actions();
    const bool fixed = spec.horizon == HorizonMode::kFixedHorizon;

    Trajectory tr;
    tr.num_agents = spec.num_agents;

    int s = sample_row(spec.initial_dist.data(), S, env.uniform());
    for (int t = 0;; ++t) {
        long long flat = 0;
        for (int i = 0; i < spec.num_agents; ++i) {
            const Table& pi = policy.agents[i];
            int ai = sample_row(pi.row(s), pi.cols, agent_rng[i].uniform());
            flat = flat * spec.action_counts[i] + ai;
        }
        size_t idx = static_cast<size_t>(s) * A + flat;
        tr.states.push_back(s);
        tr.actions.push_back(static_cast<int>(flat));
        tr.costs.push_back(spec.cost[idx]);
        for (int i = 0; i < spec.num_agents; ++i) tr.rewards.push_back(spec.rewards[i][idx]);

        const double* row = spec.transitions.data() + idx * S;
        if (fixed) {
            if (t + 1 >= spec.episode_len) break;
            // Continuation kernel renormalized by (1 - stop): draw u in
            // [0, 1-kappa) and walk the sub-stochastic row.
            double keep = 1.0 - spec.stop_probs[idx];
            double u = env.uniform() * keep;
            s = sample_row(row, S, u);
        } else {
            // One draw covers transition and stopping: the row's missing
            // mass is exactly the stop probability.
            double u = env.uniform();
            double cum = 0.0;
            int next = -1;
            for (int sp = 0; sp < S; ++sp) {
                cum += row[sp];
                if (u < cum) { next = sp; break; }
            }
            if (next < 0) break;  // stopped at this step
            s = next;
        }
    }
    return tr;
}

BatchEstimateAll estimate_batch_all(const GameSpec& spec, const JointPolicy& policy,
                                    int batch_size, RngStream rng, GradEstimator estimator) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    const int m = spec.num_agents;
    JointActionIndexer ix = spec.indexer();

    BatchEstimateAll out;
    out.agents.resize(m);
    for (int i = 0; i < m; ++i) {
        BatchEstimate& e = out.agents[i];
        e.batch_size = batch_size;
        e.grad_reward = Table(spec.num_states, spec.action_counts[i], 0.0);
        e.grad_cost = Table(spec.num_states, spec.action_counts[i], 0.0);
        e.grad_reward_se = Table(spec.num_states, spec.action_counts[i], 0.0);
        e.grad_cost_se = Table(spec.num_states, spec.action_counts[i], 0.0);
    }

    // Accumulators: per-agent batch-mean score table (for the batch-mean
    // product form) and first/second moments of the per-trajectory products.
    std::vector<Table> score_sum(m);
    std::vector<Table> prod_r(m), prod_r2(m), prod_c(m), prod_c2(m);
    for (int i = 0; i < m; ++i) {
        score_sum[i] = Table(spec.num_states, spec.action_counts[i], 0.0);
        prod_r[i] = Table(spec.num_states, spec.action_counts[i], 0.0);
        prod_r2[i] = Table(spec.num_states, spec.action_counts[i], 0.0);
        prod_c[i] = Table(spec.num_states, spec.action_counts[i], 0.0);
        prod_c2[i] = Table(spec.num_states, spec.action_counts[i], 0.0);
    }
    std::vector<double> sum_r(m, 0.0), sum_r2(m, 0.0);
    double sum_c = 0.0, sum_c2 = 0.0;

    Table score(spec.num_states, 1, 0.0);  // reshaped per agent below
    Table ep_r(spec.num_states, 1, 0.0), ep_c(spec.num_states, 1, 0.0);
    for (int b = 0; b < batch_size; ++b) {
        Trajectory tr = sample_episode(spec, policy, rng.substream(static_cast<uint64_t>(b)));
        const int len = tr.length();
        const double total_cost = tr.total_cost();
        sum_c += total_cost;
        sum_c2 += total_cost * total_cost;

        for (int i = 0; i < m; ++i) {
            double total_r = tr.total_reward(i);
            sum_r[i] += total_r;
            sum_r2[i] += total_r * total_r;

            score = Table(spec.num_states, spec.action_counts[i], 0.0);
            ep_r = Table(spec.num_states, spec.action_counts[i], 0.0);
            ep_c = Table(spec.num_states, spec.action_counts[i], 0.0);
            // Walk backward so the score at each step pairs with the
            // current-and-future payoff (the per-row constant a full-return
            // pairing would add is invisible to the simplex projection, and
            // this form is unbiased coordinate by coordinate).
            double togo_r = 0.0, togo_c = 0.0;
            for (int t = len - 1; t >= 0; --t) {
                int s = tr.states[t];
                int ai = ix.action_of(tr.actions[t], i);
                double p = policy.agents[i].at(s, ai);
                if (p <= 0.0)
                    throw std::domain_error("score undefined: sampled action has zero probability");
                togo_r += tr.reward(t, i);
                togo_c += tr.costs[t];
                score.at(s, ai) += 1.0 / p;
                ep_r.at(s, ai) += togo_r / p;
                ep_c.at(s, ai) += togo_c / p;
            }
            for (size_t k = 0; k < score.v.size(); ++k) {
                score_sum[i].v[k] += score.v[k];
                prod_r[i].v[k] += ep_r.v[k];
                prod_r2[i].v[k] += ep_r.v[k] * ep_r.v[k];
                prod_c[i].v[k] += ep_c.v[k];
                prod_c2[i].v[k] += ep_c.v[k] * ep_c.v[k];
            }
        }
    }

    const double B = static_cast<double>(batch_size);
    auto mean_se = [B](double sum, double sum2) {
        double mean = sum / B;
        double var = std::max(0.0, sum2 / B - mean * mean);
        return std::pair<double, double>(mean, B > 1 ? std::sqrt(var / (B - 1)) : 0.0);
    };

    auto [c_mean, c_se] = mean_se(sum_c, sum_c2);
    out.value_cost = c_mean;
    out.value_cost_se = c_se;

    for (int i = 0; i < m; ++i) {
        BatchEstimate& e = out.agents[i];
        auto [r_mean, r_se] = mean_se(sum_r[i], sum_r2[i]);
        e.value_reward = r_mean;
        e.value_reward_se = r_se;
        e.value_cost = c_mean;
        e.value_cost_se = c_se;

        for (size_t k = 0; k < e.grad_reward.v.size(); ++k) {
            if (estimator == GradEstimator::kBatchMeanProduct) {
                double psi_mean = score_sum[i].v[k] / B;
                e.grad_reward.v[k] = r_mean * psi_mean;
                e.grad_cost.v[k] = c_mean * psi_mean;
            } else {
                auto [gr, gr_se] = mean_se(prod_r[i].v[k], prod_r2[i].v[k]);
                auto [gc, gc_se] = mean_se(prod_c[i].v[k], prod_c2[i].v[k]);
                e.grad_reward.v[k] = gr;
                e.grad_reward_se.v[k] = gr_se;
                e.grad_cost.v[k] = gc;
                e.grad_cost_se.v[k] = gc_se;
            }
        }
    }
    return out;
}

BatchEstimate estimate_batch(const GameSpec& spec, const JointPolicy& policy, int agent,
                             int batch_size, RngStream rng, GradEstimator estimator) {
    return estimate_batch_all(spec, policy, batch_size, rng, estimator).agents[agent];
}

void write_trajectories(std::ostream& out, const GameSpec& spec,
                        const std::vector<Trajectory>& episodes) {
    JointActionIndexer ix = spec.indexer();
    std::vector<int> digits;
    for (size_t e = 0; e < episodes.size(); ++e) {
        const Trajectory& tr = episodes[e];
        out << "episode " << e << "\n";
        for (int t = 0; t < tr.length(); ++t) {
            out << t << ' ' << tr.states[t];
            ix.decode(tr.actions[t], digits);
            for (int a : digits) out << ' ' << a;
            for (int i = 0; i < tr.num_agents; ++i) out << ' ' << tr.reward(t, i);
            out << ' ' << tr.costs[t] << "\n";
        }
    }
}

}  // namespace cmpg
