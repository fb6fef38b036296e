#pragma once

#include <functional>
#include <optional>
#include <string>

#include "cmpg/csa.hpp"
#include "cmpg/game_core.hpp"
#include "cmpg/sampling.hpp"
#include "cmpg/types.hpp"

namespace cmpg {

enum class SolveMode { kExact, kStochastic };

/// Outer-loop configuration. The inner solver runs schedules.num_iters
/// switching steps per outer iteration with the proximal pull 1/eta toward
/// the current anchor.
struct ProxConfig {
    double eta = 0.1;
    double xi = 0.0;
    int outer_iters = 20;  ///< T
    SolveMode mode = SolveMode::kStochastic;
    CsaSchedules schedules;  ///< inner steps, tolerances, weights, batch, beta
    GradEstimator estimator = GradEstimator::kPerTrajectoryProduct;
    uint64_t seed = 1;
    std::string environment;
    double early_stop_tol = 0.0;  ///< 0 disables the consecutive-iterate stop
    bool last_iterate = true;     ///< practical mode; false samples the shared index
    bool membership_includes_slack = false;
    int feasibility_check_batch = 2000;  ///< stochastic initial-feasibility batch
};

struct FeasibilityCheck {
    double constraint_value = 0.0;
    double slack = 0.0;  ///< threshold - V_c(pi0), must be positive
    double standard_error = 0.0;  ///< zero in exact mode
};

/// Verifies the strictly feasible start V_c(pi0) < alpha, exactly or with a
/// large-batch estimate, and returns the slack. Throws InfeasibleError when
/// the slack is not positive.
FeasibilityCheck check_initial_feasibility(const GameSpec& spec, const JointPolicy& pi0,
                                           SolveMode mode, int batch, RngStream rng);

struct OuterRecord {
    int t = 0;
    double step_norm = 0.0;      ///< ||pi^{(t+1)} - pi^{(t)}||
    int chosen_k = 0;
    int cost_branch_count = 0;
    double inner_vc_estimate = 0.0;  ///< constraint estimate at the accepted iterate
    double wall_seconds = 0.0;
};

struct ProxResult {
    JointPolicy final_policy;
    std::vector<OuterRecord> history;
    bool early_stopped = false;
    double initial_slack = 0.0;
};

/// Called with t = 0 and the initial policy before the first update, then
/// after every outer iteration with the new anchor.
using MetricHook = std::function<void(int t, const JointPolicy& policy)>;

/// Streams one record per inner step: (t, k, branch, constraint estimate,
/// step norm).
using InnerDiagHook = std::function<void(int t, const InnerStepRecord& step)>;

/// Runs T proximal updates, each solved inexactly by the switching inner
/// loop; gradients and constraint estimates are exact (game_core) or
/// sampled (estimate_batch_all) depending on the mode. Maximize-direction
/// specs are normalized internally, so the solver always minimizes.
ProxResult run_prox(const GameSpec& spec, const JointPolicy& pi0, const ProxConfig& config,
                    const MetricHook& hook = nullptr,
                    const InnerDiagHook& inner_hook = nullptr);

/// Hyperparameter presets for the built-in environments, mirroring the
/// simulation setup (eta = 0.1, K = 20, delta = 0, last iterate, batch and
/// step size by environment and number of agents).
ProxConfig practical_config(const std::string& environment_id, int num_agents);

/// Theory-shaped configuration targeting accuracy eps from the game's
/// regularity constants: eta = 1/(2 L_phi), T = 4 eta Phi_max / eps^2 and
/// inner iterations / batch from the strongly convex schedule suggestions.
/// mode selects the exact or sampled scalings. Rejects eps <= 0.
ProxConfig theoretical_config(const GameSpec& spec, double eps, SolveMode mode);

}  // namespace cmpg
