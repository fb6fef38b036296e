#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cmpg/types.hpp"

namespace cmpg {

/// Exact expected cumulative payoff of a joint policy.
struct ValueReport {
    std::vector<double> per_state;  ///< V(s) for every start state
    double at_initial = 0.0;        ///< V(mu) = sum_s mu(s) V(s)
    std::string payoff_label;
};

/// Per-agent partial derivatives of a scalar value with respect to the
/// direct policy parameters pi_i(a_i | s).
struct GradientTable {
    std::vector<Table> slices;  ///< slices[i] shaped like policy.agents[i]
};

/// Regularity constants of the game, derived from (m, gamma, A_max):
///   m_c   = sqrt(m A_max) / (1-gamma)^2      (Lipschitz bound)
///   l_phi = 2 m gamma A_max / (1-gamma)^3    (smoothness bound)
///   eta   = 1 / (2 l_phi)
///   diam  = sqrt(2 m S)                      (policy-set diameter bound)
/// The bounds are stated for payoffs in [0,1]; unit_range_caveat is set
/// when the game's tables leave that range, in which case they are scale
/// bounds only.
struct TheoreticalConstants {
    double gamma = 0.0;
    double m_c = 0.0;
    double l_phi = 0.0;
    double eta = 0.0;
    double diam = 0.0;
    bool unit_range_caveat = false;
    /// Distribution-mismatch estimate max over deterministic joint policies
    /// of ||d_mu / mu||_inf; a lower bound on the true coefficient, absent
    /// when the game is too large to enumerate or mu has zero entries that
    /// some policy visits.
    std::optional<double> d_lower_bound;
    std::optional<double> phi_max_bound;
};

/// Expected cumulative payoff for an arbitrary payoff table with S*A
/// entries (same layout as the cost table).
///
/// Random stopping solves V = (I - P_pi)^{-1} r_pi exactly; fixed horizon
/// runs an undiscounted backward recursion over episode_len steps with the
/// renormalized continuation kernel.
ValueReport exact_value(const GameSpec& spec, const JointPolicy& policy,
                        const std::vector<double>& payoff, std::string label = "payoff");

ValueReport exact_value_reward(const GameSpec& spec, const JointPolicy& policy, int agent);
ValueReport exact_value_cost(const GameSpec& spec, const JointPolicy& policy);

/// State visitation measure d_mu(s') = E[sum_t 1{s_t = s'}], the solution
/// of d = (I - P_pi^T)^{-1} mu. Random stopping only; its total mass equals
/// the expected episode length.
std::vector<double> visitation(const GameSpec& spec, const JointPolicy& policy);

/// Exact partial derivatives of V_{payoff, mu} with respect to agent i's
/// policy entries:
///   d V / d pi_i(a_i|s) = d_mu(s) * Qbar(s, a_i)
/// where Qbar marginalizes the other agents' policies over the one-step
/// payoff plus continuation value. Random stopping only.
Table exact_policy_gradient(const GameSpec& spec, const JointPolicy& policy,
                            const std::vector<double>& payoff, int agent);

/// Gradient slices for every agent at once (shares the value/visitation
/// solves across agents).
GradientTable exact_policy_gradient_all(const GameSpec& spec, const JointPolicy& policy,
                                        const std::vector<double>& payoff);

/// Constants from the game dimensions. Throws std::domain_error when
/// gamma = 0 (eta undefined) and UnsupportedModeError outside random
/// stopping. enumerate_mismatch enables the deterministic-policy lower
/// bound for small games.
TheoreticalConstants theoretical_constants(const GameSpec& spec, bool enumerate_mismatch = false);

}  // namespace cmpg
