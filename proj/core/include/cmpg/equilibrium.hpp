#pragma once

#include <optional>
#include <vector>

#include "cmpg/game_core.hpp"
#include "cmpg/sampling.hpp"
#include "cmpg/types.hpp"

namespace cmpg {

/// Candidate per-state joint-action potential table with its verification
/// state. phi has the cost-table layout (S * A_joint entries).
struct PotentialSpec {
    std::vector<double> phi;
    enum class Status { kUnchecked, kVerified, kFalsified } status = Status::kUnchecked;
    double max_deviation = 0.0;
};

/// Single-agent constrained MDP induced by freezing the other agents:
/// kernel, reward and cost marginalized over their policies.
struct InducedCmdp {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> reward;   // S * A_i
    std::vector<double> cost;     // S * A_i
    std::vector<double> kernel;   // (s * A_i + a) * S + s', sub-stochastic
    std::vector<double> initial_dist;
    double threshold = kInfinity;
};

InducedCmdp marginalize(const GameSpec& spec, const JointPolicy& policy, int agent);

struct BestResponse {
    bool feasible = false;      ///< feasible set of the induced CMDP nonempty
    double value = 0.0;         ///< optimal constrained value (minimization)
    double cost_value = 0.0;    ///< cost value of the optimizer
    Table policy;               ///< recovered from the occupancy measure
    std::vector<double> occupancy;
    std::optional<double> dual_lambda;  ///< from the dual route, when run
};

/// Exact constrained best response of one agent with the others frozen,
/// solved as an occupancy-measure linear program: variables rho(s, a) >= 0,
/// flow constraints sum_a rho(s',a) = mu(s') + sum_{s,a} rho(s,a) P(s'|s,a),
/// cost constraint rho . cost <= threshold, objective rho . reward. The
/// policy is recovered as rho(s,a) / sum_a rho(s,a) (uniform on unreached
/// states). Works on the minimization orientation; maximize-direction specs
/// are normalized internally. Random stopping only.
BestResponse best_response_feasible_value(const GameSpec& spec, const JointPolicy& policy,
                                          int agent);

/// Independent cross-check of the LP route: bisection on the multiplier of
/// the scalarized payoff reward + lambda * cost, each evaluation an exact
/// policy-iteration solve of the induced MDP. Returns the optimal dual
/// value (= the primal constrained optimum by CMDP strong duality) and the
/// multiplier, or feasible = false when even the pure cost minimizer
/// violates the threshold.
BestResponse best_response_dual_bisection(const GameSpec& spec, const JointPolicy& policy,
                                          int agent);

struct PlayerEval {
    enum class Status { kOk, kEmptyFeasibleSet } status = Status::kOk;
    double exploitability = 0.0;  ///< own value minus constrained best response
    double value = 0.0;           ///< V_{r_i}(pi), minimization orientation
    double best_response_value = 0.0;
    std::optional<double> dual_lambda;
};

struct EquilibriumReport {
    std::vector<PlayerEval> players;
    double nash_gap = 0.0;  ///< max exploitability over players with kOk status
    bool feasible = false;  ///< V_c(pi) <= threshold (+ tolerance)
    bool any_empty_feasible_set = false;
    double constraint_value = 0.0;
};

/// Exploitability of every player against its constrained best response and
/// their maximum. Exploitabilities are sign-adjusted to the declared
/// objective direction, so they are >= 0 up to solver tolerance either way.
EquilibriumReport nash_gap(const GameSpec& spec, const JointPolicy& policy);

/// Exact expected cumulative potential E[sum_t phi_{s_t}(a_t)].
double potential_value(const GameSpec& spec, const PotentialSpec& potential,
                       const JointPolicy& policy);

struct MpgVerification {
    PotentialSpec::Status status = PotentialSpec::Status::kUnchecked;
    double max_deviation = 0.0;
    int trials = 0;
};

/// Samples random (pi, pi'_i, i) deviation triples and compares the exact
/// playerwise value difference against the potential difference. Verified
/// when the largest absolute mismatch stays within tol.
MpgVerification verify_mpg(const GameSpec& spec, const PotentialSpec& potential, int trials,
                           double tol, RngStream rng);

/// Fully random interior joint policy (rows drawn from a Dirichlet-like
/// construction, floored by xi).
JointPolicy random_policy(const GameSpec& spec, double xi, RngStream& rng);

}  // namespace cmpg
