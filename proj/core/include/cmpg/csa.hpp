#pragma once

#include <functional>
#include <vector>

#include "cmpg/sampling.hpp"
#include "cmpg/types.hpp"

namespace cmpg {

/// Euclidean projection onto the floored simplex
///   { p : p_a >= floor_xi / A, sum_a p_a = 1 }
/// by shifting out the floor and running the sort-based simplex projection
/// on the remaining mass 1 - floor_xi. floor_xi outside [0, 1] throws
/// std::invalid_argument.
std::vector<double> project_floored_simplex(const std::vector<double>& y, double floor_xi);

/// In-place row variant used by the solvers.
void project_floored_simplex_inplace(double* y, int n, double floor_xi,
                                     std::vector<double>& scratch);

/// Inner-solver schedule: step sizes, switching tolerances and selection
/// weights, indexed by inner iteration (index 0 unused by the theoretical
/// recursions, which are 1-based; the vectors are sized num_iters + 1).
struct CsaSchedules {
    int num_iters = 0;         ///< K
    std::vector<double> nu;    ///< step sizes
    std::vector<double> delta; ///< switching / membership tolerances
    std::vector<double> rho;   ///< selection weights
    int select_start = 0;      ///< s, first candidate iteration
    int batch_size = 1;        ///< constraint-estimate batch size (B or J)
    double beta = 0.0;         ///< constraint slack
};

/// Constant-step schedule with zero tolerances: the configuration used for
/// the experiment presets (last-iterate, delta = 0).
CsaSchedules practical_schedules(int num_iters, double nu, int batch_size, double beta = 0.0);

/// Schedule choices for a strongly convex objective/constraint pair:
///   nu_k  = 2 / (mu_b (k+1))
///   a_k   = mu_b nu_k,  A_1 = 1,  A_k = (1 - a_k) A_{k-1},  rho_k = nu_k / A_k
///   delta_k = lambda / sqrt(J) + (1 / 2k)(4 Delta^2 / k + 16 M^2 / mu^2) mu_b
/// with mu_b the modulus of the branch taken at k, mu = min(mu_F, mu_G),
/// lambda = sigma^2 log(N^2 / (4 f_max)) clamped to >= 0, and
///   N = max{ 64 mu_F M^2 / (mu^2 eps^2), sqrt(32 Delta^2 mu_F) / eps,
///            32 sigma mu_F / (mu eps^2) }
///   J = max{ 9 lambda^2 / eps^2, 32 sigma mu_F / (mu eps^2), 1 }.
/// Branches are committed lazily, in iteration order, as they are decided.
class TheoreticalSchedules {
public:
    TheoreticalSchedules(double mu_f, double mu_g, double bound_m, double diameter,
                         double sigma, double epsilon, double f_max = 1.0);

    long long suggested_iters() const { return n_; }
    int suggested_batch() const { return j_; }
    double lambda_value() const { return lambda_; }

    double nu(int k, bool objective_branch) const;
    double delta(int k, bool objective_branch) const;

    /// Records the branch of iteration k (k = 1, 2, ... in order) and
    /// returns rho_k.
    double commit(int k, bool objective_branch);

    /// Materialized schedule assuming every iteration takes the objective
    /// branch; exact when mu_F = mu_G, where the values are branch-free.
    CsaSchedules materialize(int num_iters, int batch_size) const;

private:
    double mu_f_, mu_g_, mu_min_, m_, diam_, sigma_, f_max_;
    long long n_ = 0;
    int j_ = 1;
    double lambda_ = 0.0;
    double a_prev_ = 1.0;  // A_{k-1}
    int committed_ = 0;
};

// ---------------------------------------------------------------------------
// Per-agent switching inner loop for the proximal subproblem
// ---------------------------------------------------------------------------

/// Shared estimates consumed by one inner iteration: the constraint value
/// estimate (identical for every agent) and per-agent gradient slices of
/// the reward and cost values.
struct InnerEstimates {
    double vc_hat = 0.0;
    std::vector<Table> grad_reward;
    std::vector<Table> grad_cost;
};

/// Provider of estimates at an inner iterate; k is the inner iteration
/// index. Exact providers ignore the randomness; stochastic ones derive a
/// batch from (t, k).
using InnerProvider = std::function<InnerEstimates(const JointPolicy& iterate, int k)>;

struct InnerLoopConfig {
    CsaSchedules schedules;
    double eta = 0.0;    ///< proximal step of the outer loop
    double alpha = 0.0;  ///< constraint threshold
    double xi = 0.0;     ///< policy floor
    bool last_iterate = false;  ///< output the final iterate, no index sampling
    /// When true the candidate test matches the switching test
    /// (vc + beta - alpha <= delta) instead of the plain vc <= delta.
    bool membership_includes_slack = false;
};

/// One projected switching step for a single agent. Descends the reward
/// gradient when vc_hat + beta - alpha <= delta_k (inclusive), else the
/// cost gradient, always with the proximal pull (nu_k / eta)(pi - anchor),
/// and projects every row onto the floored simplex. Returns the branch
/// taken (true = reward).
bool inner_step(Table& iterate, const Table& anchor, const Table& grad_reward,
                const Table& grad_cost, double vc_hat, double nu_k, double delta_k,
                double eta, double alpha, double beta, double xi);

struct InnerStepRecord {
    int k = 0;
    bool cost_branch = false;
    double vc_hat = 0.0;
    double step_norm = 0.0;
};

struct InnerLoopResult {
    JointPolicy output;
    int chosen_k = 0;
    std::vector<int> candidate_set;
    std::vector<InnerStepRecord> steps;   ///< one per update, k = 0..K-1
    std::vector<double> vc_estimates;     ///< at iterates k = 0..K
    int cost_branch_count = 0;
    double output_vc_estimate = 0.0;
    bool output_feasible_estimate = false;  ///< output_vc_estimate <= alpha
};

/// Runs K switching steps for all agents simultaneously: one shared
/// constraint estimate per iteration decides the branch for every agent,
/// the candidate set collects iterates k in [floor(K/2), K] whose estimate
/// passes the membership test, and the returned policy is the iterate at a
/// shared index sampled with probabilities rho_k (k_hat = 1 when the set is
/// empty). In last-iterate mode the final iterate is returned instead.
InnerLoopResult run_inner_loop(const GameSpec& spec, const JointPolicy& anchor,
                               const InnerLoopConfig& config, const InnerProvider& provider,
                               RngStream rng);

// ---------------------------------------------------------------------------
// Generic switching solver for strongly convex constrained problems
// ---------------------------------------------------------------------------

struct FeasibleSet {
    enum class Kind { kBox, kSimplexProduct } kind = Kind::kBox;
    std::vector<double> lower, upper;  // box bounds
    int blocks = 0, block_size = 0;    // simplex product shape
    double floor_xi = 0.0;

    static FeasibleSet box(std::vector<double> lo, std::vector<double> hi);
    static FeasibleSet simplex_product(int blocks, int block_size, double floor_xi = 0.0);

    int dim() const;
    void project(std::vector<double>& x) const;
    double diameter() const;
};

/// Strongly convex objective/constraint pair accessed through stochastic
/// first-order oracles plus a zeroth-order constraint oracle.
struct GenericCsaProblem {
    FeasibleSet set;
    std::function<void(const std::vector<double>&, RngStream&, std::vector<double>&)> objective_grad;
    std::function<void(const std::vector<double>&, RngStream&, std::vector<double>&)> constraint_grad;
    std::function<double(const std::vector<double>&, RngStream&)> constraint_value;
    double mu_f = 0.0;
    double mu_g = 0.0;
    double bound_m = 0.0;
    double sigma = 0.0;
    double f_max = 1.0;
};

struct CsaGenericOptions {
    int num_iters = 0;        ///< N; 0 means the schedule's suggestion
    int batch_j = 0;          ///< J; 0 means the schedule's suggestion
    double init_feasibility_eps = 1e-9;  ///< required g(x_1) <= eps
    bool zero_delta = false;  ///< run with delta_k = 0
};

struct CsaGenericResult {
    std::vector<double> solution;
    int chosen_k = 0;
    std::vector<std::vector<double>> iterates;   ///< x_1..x_N
    std::vector<double> constraint_estimates;    ///< Ghat_k per iterate
    std::vector<char> cost_branch;               ///< 1 if step k took the constraint branch
    std::vector<int> candidate_set;
};

/// The switching solver on a generic problem: starts from x1 (must satisfy
/// the estimated constraint within init_feasibility_eps), runs N-1
/// projected steps switching on Ghat_k <= delta_k with batch-J constraint
/// estimates, then samples the output index from the candidate set
/// proportionally to rho_k.
CsaGenericResult csa_generic(const GenericCsaProblem& problem, TheoreticalSchedules schedules,
                             const std::vector<double>& x1, const CsaGenericOptions& options,
                             RngStream rng);

}  // namespace cmpg
