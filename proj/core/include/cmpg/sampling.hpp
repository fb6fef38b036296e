#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "cmpg/types.hpp"

namespace cmpg {

/// Counter-based deterministic random stream. A stream is identified by a
/// 64-bit key; drawing advances a counter, and substream(tag) derives a new
/// independent key from (key, tag) without consuming any state. Identical
/// (seed, chain of tags) therefore always reproduces the same sequence,
/// independent of what sibling streams consumed.
class RngStream {
public:
    static RngStream root(uint64_t seed) { return RngStream(mix(seed ^ 0x8000000000000001ull)); }

    RngStream substream(uint64_t tag) const { return RngStream(mix(key_ ^ mix(tag + 0x9E3779B97F4A7C15ull))); }
    RngStream substream(std::string_view name) const;
    RngStream substream(std::string_view name, uint64_t index) const {
        return substream(name).substream(index);
    }

    uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ull); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Index sampled proportionally to the first n entries of weights
    /// (weights need not be normalized; total must be positive).
    int categorical(const double* weights, int n);

private:
    explicit RngStream(uint64_t key) : key_(key) {}

    static uint64_t mix(uint64_t z) {
        z ^= z >> 33;
        z *= 0xFF51AFD7ED558CCDull;
        z ^= z >> 33;
        z *= 0xC4CEB9FE1A85EC53ull;
        z ^= z >> 33;
        return z;
    }

    uint64_t key_;
    uint64_t counter_ = 0;
};

/// One sampled episode. states, actions and costs have length() entries;
/// rewards is indexed [t * m + i]. actions holds flat joint indices.
struct Trajectory {
    std::vector<int> states;
    std::vector<int> actions;
    std::vector<double> rewards;
    std::vector<double> costs;
    int num_agents = 0;

    int length() const { return static_cast<int>(states.size()); }
    double reward(int t, int agent) const { return rewards[static_cast<size_t>(t) * num_agents + agent]; }

    /// Total reward of one agent over the episode.
    double total_reward(int agent) const {
        double r = 0.0;
        for (int t = 0; t < length(); ++t) r += reward(t, agent);
        return r;
    }
    double total_cost() const {
        double c = 0.0;
        for (double x : costs) c += x;
        return c;
    }
};

/// Samples one episode. The initial state and all environment draws come
/// from rng.substream("env"); agent i draws its actions from
/// rng.substream("agent", i), so every agent sees the same shared state
/// sequence while consuming its own substream. Under random stopping the
/// final (stopping) step is part of the trajectory and collects payoffs;
/// under a fixed horizon the episode has exactly episode_len steps.
Trajectory sample_episode(const GameSpec& spec, const JointPolicy& policy, RngStream rng);

enum class GradEstimator {
    /// (batch-mean return) x (batch-mean score sum), the literal product of
    /// batch means.
    kBatchMeanProduct,
    /// Batch mean of per-episode products, pairing each step's score with
    /// the payoff from that step on. Unbiased for the exact gradient
    /// coordinate by coordinate; the full-return pairing differs from it
    /// only by per-row constants, which the simplex projection ignores.
    kPerTrajectoryProduct,
};

/// Value and playerwise policy-gradient estimates for one agent from a
/// batch of episodes.
struct BatchEstimate {
    double value_reward = 0.0;  ///< mean total reward of the agent
    double value_cost = 0.0;    ///< mean total cost
    double value_reward_se = 0.0;
    double value_cost_se = 0.0;
    Table grad_reward;  ///< shaped like the agent's policy table
    Table grad_cost;
    Table grad_reward_se;  ///< per-coordinate standard errors (per-trajectory
    Table grad_cost_se;    ///< estimator only; zero tables otherwise)
    int batch_size = 0;
};

/// Batch estimates for every agent from the same episodes.
struct BatchEstimateAll {
    std::vector<BatchEstimate> agents;
    double value_cost = 0.0;  ///< the shared constraint estimate
    double value_cost_se = 0.0;
};

/// Samples batch_size episodes from rng.substream(b), b = 0..batch_size-1,
/// and forms the score-function estimators. The score of agent i on a taken
/// entry is 1 / pi_i(a|s); a nonpositive probability on a sampled action
/// raises std::domain_error.
BatchEstimateAll estimate_batch_all(const GameSpec& spec, const JointPolicy& policy,
                                    int batch_size, RngStream rng,
                                    GradEstimator estimator = GradEstimator::kBatchMeanProduct);

/// Single-agent view of estimate_batch_all; the same rng yields the same
/// episodes, so per-agent calls are consistent with the joint one.
BatchEstimate estimate_batch(const GameSpec& spec, const JointPolicy& policy, int agent,
                             int batch_size, RngStream rng,
                             GradEstimator estimator = GradEstimator::kBatchMeanProduct);

/// Debug dump, one step per line: "t s a_0 .. a_{m-1} r_0 .. r_{m-1} c",
/// episodes preceded by "episode N" lines.
void write_trajectories(std::ostream& out, const GameSpec& spec,
                        const std::vector<Trajectory>& episodes);

}  // namespace cmpg
