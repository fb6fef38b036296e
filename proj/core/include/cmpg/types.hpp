#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmpg {

/// Thrown when a linear system that should be regular turns out singular,
/// which usually means the stopping probabilities of the game are broken.
struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when an operation is only defined for one horizon mode and is
/// called with the other (e.g. visitation under a fixed horizon).
struct UnsupportedModeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a feasibility precondition fails (strictly feasible start,
/// feasible initial point of the switching solver, empty feasible set).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Dense rows x cols table of reals, row-major. Used for policies
/// (rows = states, cols = actions of one agent) and for gradient slices.
struct Table {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Table() = default;
    Table(int rows_, int cols_, double fill = 0.0)
        : rows(rows_), cols(cols_), v(static_cast<size_t>(rows_) * cols_, fill) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
};

/// Bijection between joint-action tuples (a_0, ..., a_{m-1}) and a flat
/// index. The flat index is row-major over agents with agent 0 outermost:
///
///   flat = ((a_0 * A_1 + a_1) * A_2 + a_2) * ... + a_{m-1}
///
/// so the last agent's action varies fastest. Serialization and all joint
/// tables (rewards, cost, transitions, stop probabilities) use this order.
struct JointActionIndexer {
    std::vector<int> action_counts;

    explicit JointActionIndexer(std::vector<int> counts = {})
        : action_counts(std::move(counts)) {}

    int num_agents() const { return static_cast<int>(action_counts.size()); }

    long long joint_count() const {
        long long n = 1;
        for (int a : action_counts) n *= a;
        return n;
    }

    int encode(const std::vector<int>& actions) const {
        long long idx = 0;
        for (size_t i = 0; i < action_counts.size(); ++i)
            idx = idx * action_counts[i] + actions[i];
        return static_cast<int>(idx);
    }

    void decode(int flat, std::vector<int>& actions_out) const {
        actions_out.resize(action_counts.size());
        for (int i = num_agents() - 1; i >= 0; --i) {
            actions_out[i] = flat % action_counts[i];
            flat /= action_counts[i];
        }
    }

    /// Action of one agent under a flat joint index.
    int action_of(int flat, int agent) const {
        for (int i = num_agents() - 1; i > agent; --i) flat /= action_counts[i];
        return flat % action_counts[agent];
    }
};

enum class HorizonMode {
    kRandomStopping,  ///< per-(state,action) termination probability
    kFixedHorizon,    ///< exactly episode_len decision steps
};

enum class Objective {
    kMinimize,
    kMaximize,
};

/// Tabular constrained Markov game with a shared cost and threshold.
///
/// Layout conventions, with S = num_states, A = product of action_counts:
///  - rewards[i] has S*A entries, index s*A + a (a = flat joint index),
///  - cost has S*A entries,
///  - stop_probs has S*A entries, each in (0, 1],
///  - transitions has S*A*S entries, index (s*A + a)*S + s'. The rows are
///    sub-stochastic continuation kernels: sum_{s'} P + stop = 1.
///
/// In kFixedHorizon mode episodes run exactly episode_len steps and the
/// per-step state distribution is the continuation kernel renormalized by
/// (1 - stop), i.e. stopping is disabled but the same tables are reused.
struct GameSpec {
    int num_states = 0;
    int num_agents = 0;
    std::vector<int> action_counts;

    std::vector<std::vector<double>> rewards;  // one table per agent
    std::vector<double> cost;
    std::vector<double> transitions;
    std::vector<double> stop_probs;
    std::vector<double> initial_dist;

    double threshold = kInfinity;
    HorizonMode horizon = HorizonMode::kRandomStopping;
    int episode_len = 0;  // T_e, used in kFixedHorizon mode only
    Objective objective = Objective::kMinimize;

    JointActionIndexer indexer() const { return JointActionIndexer(action_counts); }

    long long joint_actions() const { return JointActionIndexer(action_counts).joint_count(); }

    int max_actions() const {
        int a = 0;
        for (int c : action_counts) a = std::max(a, c);
        return a;
    }

    double min_stop() const {
        double k = 1.0;
        for (double x : stop_probs) k = std::min(k, x);
        return k;
    }

    /// gamma = 1 - min stop probability; the effective discount factor of
    /// the random-stopping game.
    double gamma() const { return 1.0 - min_stop(); }
};

/// Per-agent stochastic policy tables. agents[i] is a Table with
/// rows = num_states and cols = action_counts[i]; each row is a probability
/// vector. If xi > 0 every entry must be at least xi / A_i.
struct JointPolicy {
    std::vector<Table> agents;
    double xi = 0.0;

    int num_agents() const { return static_cast<int>(agents.size()); }

    /// Probability of the flat joint action a in state s under the product
    /// policy.
    double joint_prob(const JointActionIndexer& ix, int s, int flat) const {
        double p = 1.0;
        for (int i = ix.num_agents() - 1; i >= 0; --i) {
            int ai = flat % ix.action_counts[i];
            flat /= ix.action_counts[i];
            p *= agents[i].at(s, ai);
        }
        return p;
    }
};

/// Euclidean norm of the difference between two joint policies, over all
/// (agent, state, action) entries.
double policy_distance(const JointPolicy& a, const JointPolicy& b);

/// Policy with uniform rows for every agent.
JointPolicy uniform_policy(const GameSpec& spec, double xi = 0.0);

/// Policy putting mass 1 - eps on `action` (clamped to the agent's range)
/// and eps spread evenly over the remaining actions.
JointPolicy greedy_policy(const GameSpec& spec, int action, double eps = 0.0);

/// One violated-invariant message per problem; empty means the spec is
/// well-formed.
std::vector<std::string> validate_spec(const GameSpec& spec);

/// Messages for policy shape/stochasticity/floor violations against a spec.
std::vector<std::string> validate_policy(const GameSpec& spec, const JointPolicy& policy);

/// Copy of the spec with rewards negated when the declared objective is
/// kMaximize, so that solvers can always minimize. Costs and the threshold
/// are left untouched. Idempotent on kMinimize specs.
GameSpec normalized_to_minimize(const GameSpec& spec);

}  // namespace cmpg
