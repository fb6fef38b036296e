#include "cmpg/csa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cmpg {

void project_floored_simplex_inplace(double* y, int n, double floor_xi,
                                     std::vector<double>& scratch) {
    if (floor_xi < 0.0 || floor_xi > 1.0)
        throw std::invalid_argument("floor must lie in [0, 1]");
    const double f = floor_xi / n;
    const double mass = 1.0 - floor_xi;
    if (mass <= 0.0) {  // xi = 1: the set is the single point (f, ..., f)
        for (int i = 0; i < n; ++i) y[i] = f;
        return;
    }

    scratch.assign(y, y + n);
    for (double& z : scratch) z -= f;
    std::sort(scratch.begin(), scratch.end(), std::greater<double>());

    // tau from the largest k with z_(k) - (prefix_k - mass)/k > 0.
    double prefix = 0.0, tau = 0.0;
    for (int j = 0; j < n; ++j) {
        prefix += scratch[j];
        double cand = (prefix - mass) / (j + 1);
        if (scratch[j] - cand > 0.0) tau = cand;
    }
    for (int i = 0; i < n; ++i) y[i] = std::max(y[i] - f - tau, 0.0) + f;
}

std::vector<double> project_floored_simplex(const std::vector<double>& y, double floor_xi) {
    std::vector<double> out = y;
    std::vector<double> scratch;
    project_floored_simplex_inplace(out.data(), static_cast<int>(out.size()), floor_xi, scratch);
    return out;
}

CsaSchedules practical_schedules(int num_iters, double nu, int batch_size, double beta) {
    if (num_iters < 1) throw std::invalid_argument("num_iters must be >= 1");
    if (nu <= 0.0) throw std::invalid_argument("step size must be positive");
    CsaSchedules s;
    s.num_iters = num_iters;
    s.nu.assign(num_iters + 1, nu);
    s.delta.assign(num_iters + 1, 0.0);
    s.rho.assign(num_iters + 1, 0.0);
    for (int k = 0; k <= num_iters; ++k) s.rho[k] = static_cast<double>(std::max(k, 1));
    s.select_start = num_iters / 2;
    s.batch_size = batch_size;
    s.beta = beta;
    return s;
}

TheoreticalSchedules::TheoreticalSchedules(double mu_f, double mu_g, double bound_m,
                                           double diameter, double sigma, double epsilon,
                                           double f_max)
    : mu_f_(mu_f), mu_g_(mu_g), mu_min_(std::min(mu_f, mu_g)), m_(bound_m), diam_(diameter),
      sigma_(sigma), f_max_(f_max) {
    if (mu_f <= 0.0 || mu_g <= 0.0) throw std::invalid_argument("moduli must be positive");
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    if (diameter <= 0.0) throw std::invalid_argument("diameter must be positive");

    double eps2 = epsilon * epsilon;
    double n1 = 64.0 * mu_f_ * m_ * m_ / (mu_min_ * mu_min_ * eps2);
    double n2 = std::sqrt(32.0 * diam_ * diam_ * mu_f_) / epsilon;
    double n3 = 32.0 * sigma_ * mu_f_ / (mu_min_ * eps2);
    n_ = static_cast<long long>(std::ceil(std::max({n1, n2, n3})));
    n_ = std::max<long long>(n_, 2);

    double logarg = static_cast<double>(n_) * static_cast<double>(n_) / (4.0 * f_max_);
    lambda_ = sigma_ * sigma_ * std::log(std::max(logarg, 1.0));

    double j1 = 9.0 * lambda_ * lambda_ / eps2;
    double j2 = 32.0 * sigma_ * mu_f_ / (mu_min_ * eps2);
    j_ = static_cast<int>(std::ceil(std::max({j1, j2, 1.0})));
}

double TheoreticalSchedules::nu(int k, bool objective_branch) const {
    double mu_b = objective_branch ? mu_f_ : mu_g_;
    return 2.0 / (mu_b * (k + 1));
}

double TheoreticalSchedules::delta(int k, bool objective_branch) const {
    double mu_b = objective_branch ? mu_f_ : mu_g_;
    double core = (4.0 * diam_ * diam_ / k + 16.0 * m_ * m_ / (mu_min_ * mu_min_)) / (2.0 * k);
    return lambda_ / std::sqrt(static_cast<double>(j_)) + core * mu_b;
}

double TheoreticalSchedules::commit(int k, bool objective_branch) {
    if (k != committed_ + 1)
        throw std::logic_error("schedule branches must be committed in iteration order");
    committed_ = k;
    double nu_k = nu(k, objective_branch);
    double a_k = (objective_branch ? mu_f_ : mu_g_) * nu_k;
    a_prev_ = (k == 1) ? 1.0 : (1.0 - a_k) * a_prev_;
    return nu_k / a_prev_;
}

CsaSchedules TheoreticalSchedules::materialize(int num_iters, int batch_size) const {
    CsaSchedules s;
    s.num_iters = num_iters;
    s.nu.assign(num_iters + 1, 0.0);
    s.delta.assign(num_iters + 1, 0.0);
    s.rho.assign(num_iters + 1, 0.0);
    TheoreticalSchedules gen = *this;
    gen.committed_ = 0;
    gen.a_prev_ = 1.0;
    for (int k = 1; k <= num_iters; ++k) {
        s.nu[k] = gen.nu(k, true);
        s.delta[k] = gen.delta(k, true);
        s.rho[k] = gen.commit(k, true);
    }
    s.nu[0] = s.nu[1];
    s.delta[0] = s.delta[1];
    s.rho[0] = 0.0;
    s.select_start = num_iters / 2;
    s.batch_size = batch_size;
    return s;
}

// ---------------------------------------------------------------------------
// Inner loop
// ---------------------------------------------------------------------------

bool inner_step(Table& iterate, const Table& anchor, const Table& grad_reward,
                const Table& grad_cost, double vc_hat, double nu_k, double delta_k,
                double eta, double alpha, double beta, double xi) {
    const bool reward_branch = vc_hat + beta - alpha <= delta_k;
    const Table& g = reward_branch ? grad_reward : grad_cost;
    const double pull = nu_k / eta;
    std::vector<double> scratch;
    for (int s = 0; s < iterate.rows; ++s) {
        double* row = iterate.row(s);
        const double* a_row = anchor.row(s);
        const double* g_row = g.row(s);
        for (int c = 0; c < iterate.cols; ++c)
            row[c] -= nu_k * g_row[c] + pull * (row[c] - a_row[c]);
        project_floored_simplex_inplace(row, iterate.cols, xi, scratch);
    }
    return reward_branch;
}

InnerLoopResult run_inner_loop(const GameSpec& spec, const JointPolicy& anchor,
                               const InnerLoopConfig& config, const InnerProvider& provider,
                               RngStream rng) {
    const int K = config.schedules.num_iters;
    if (K < 1) throw std::invalid_argument("inner loop needs at least one iteration");
    if (config.eta <= 0.0) throw std::invalid_argument("eta must be positive");

    const double alpha = config.alpha;
    const double beta = config.schedules.beta;

    InnerLoopResult result;
    // The sampled-index output needs every iterate; last-iterate mode only
    // keeps the current one.
    const bool keep_iterates = !config.last_iterate;
    std::vector<JointPolicy> iterates;
    JointPolicy current = anchor;
    current.xi = std::max(anchor.xi, config.xi);
    if (keep_iterates) {
        iterates.reserve(K + 1);
        iterates.push_back(current);
    }
    result.vc_estimates.assign(K + 1, 0.0);

    for (int k = 0; k <= K; ++k) {
        InnerEstimates est = provider(current, k);
        result.vc_estimates[k] = est.vc_hat;
        if (k == K) break;

        JointPolicy next = current;
        double nu_k = config.schedules.nu[k];
        double delta_k = config.schedules.delta[k];
        bool reward_branch = true;
        for (int i = 0; i < spec.num_agents; ++i) {
            // Every agent sees the same shared estimate, hence the same branch.
            reward_branch = inner_step(next.agents[i], anchor.agents[i], est.grad_reward[i],
                                       est.grad_cost[i], est.vc_hat, nu_k, delta_k, config.eta,
                                       alpha, beta, config.xi);
        }
        InnerStepRecord rec;
        rec.k = k;
        rec.cost_branch = !reward_branch;
        rec.vc_hat = est.vc_hat;
        rec.step_norm = policy_distance(next, current);
        result.steps.push_back(rec);
        if (!reward_branch) ++result.cost_branch_count;
        current = std::move(next);
        if (keep_iterates) iterates.push_back(current);
    }

    for (int k = K / 2; k <= K; ++k) {
        double lhs = config.membership_includes_slack ? result.vc_estimates[k] + beta - alpha
                                                      : result.vc_estimates[k];
        if (lhs <= config.schedules.delta[k]) result.candidate_set.push_back(k);
    }

    int chosen;
    if (config.last_iterate) {
        chosen = K;
    } else if (result.candidate_set.empty()) {
        chosen = std::min(1, K);
    } else {
        std::vector<double> w;
        w.reserve(result.candidate_set.size());
        for (int k : result.candidate_set) w.push_back(config.schedules.rho[k]);
        RngStream idx_rng = rng.substream("shared-index");
        chosen = result.candidate_set[idx_rng.categorical(w.data(), static_cast<int>(w.size()))];
    }
    result.chosen_k = chosen;
    result.output = keep_iterates ? iterates[chosen] : std::move(current);
    result.output_vc_estimate = result.vc_estimates[chosen];
    result.output_feasible_estimate = result.output_vc_estimate <= alpha;
    return result;
}

// ---------------------------------------------------------------------------
// Generic solver
// ---------------------------------------------------------------------------

FeasibleSet FeasibleSet::box(std::vector<double> lo, std::vector<double> hi) {
    FeasibleSet s;
    s.kind = Kind::kBox;
    s.lower = std::move(lo);
    s.upper = std::move(hi);
    return s;
}

FeasibleSet FeasibleSet::simplex_product(int blocks, int block_size, double floor_xi) {
    FeasibleSet s;
    s.kind = Kind::kSimplexProduct;
    s.blocks = blocks;
    s.block_size = block_size;
    s.floor_xi = floor_xi;
    return s;
}

int FeasibleSet::dim() const {
    return kind == Kind::kBox ? static_cast<int>(lower.size()) : blocks * block_size;
}

void FeasibleSet::project(std::vector<double>& x) const {
    if (kind == Kind::kBox) {
        for (size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    } else {
        std::vector<double> scratch;
        for (int b = 0; b < blocks; ++b)
            project_floored_simplex_inplace(x.data() + static_cast<size_t>(b) * block_size,
                                            block_size, floor_xi, scratch);
    }
}

double FeasibleSet::diameter() const {
    if (kind == Kind::kBox) {
        double sq = 0.0;
        for (size_t i = 0; i < lower.size(); ++i) {
            double d = upper[i] - lower[i];
            sq += d * d;
        }
        return std::sqrt(sq);
    }
    return std::sqrt(2.0 * blocks);
}

CsaGenericResult csa_generic(const GenericCsaProblem& problem, TheoreticalSchedules schedules,
                             const std::vector<double>& x1, const CsaGenericOptions& options,
                             RngStream rng) {
    const int n = options.num_iters > 0 ? options.num_iters
                                        : static_cast<int>(schedules.suggested_iters());
    const int j = options.batch_j > 0 ? options.batch_j : schedules.suggested_batch();
    if (n < 2) throw std::invalid_argument("need at least two iterations");

    RngStream oracle_rng = rng.substream("oracle");
    RngStream batch_rng = rng.substream("constraint-batch");

    auto batch_estimate = [&](const std::vector<double>& x, int k) {
        RngStream r = batch_rng.substream(static_cast<uint64_t>(k));
        double sum = 0.0;
        for (int b = 0; b < j; ++b) sum += problem.constraint_value(x, r);
        return sum / j;
    };

    std::vector<double> x = x1;
    problem.set.project(x);
    double g1 = batch_estimate(x, 0);
    if (g1 > options.init_feasibility_eps)
        throw InfeasibleError("initial point violates the estimated constraint");

    CsaGenericResult result;
    result.iterates.reserve(n);
    result.constraint_estimates.reserve(n);
    std::vector<double> rho(n + 1, 0.0);

    std::vector<double> grad(x.size());
    for (int k = 1; k <= n; ++k) {
        double ghat = batch_estimate(x, k);
        result.iterates.push_back(x);
        result.constraint_estimates.push_back(ghat);

        bool objective = options.zero_delta ? (ghat <= 0.0) : (ghat <= schedules.delta(k, true));
        if (!options.zero_delta && !objective && ghat <= schedules.delta(k, false))
            objective = true;  // inconsistent zone between branch tolerances
        double nu_k = schedules.nu(k, objective);
        rho[k] = schedules.commit(k, objective);
        if (k == n) break;  // the final iterate only contributes its weight
        result.cost_branch.push_back(objective ? 0 : 1);

        RngStream step_rng = oracle_rng.substream(static_cast<uint64_t>(k));
        if (objective)
            problem.objective_grad(x, step_rng, grad);
        else
            problem.constraint_grad(x, step_rng, grad);
        for (size_t i = 0; i < x.size(); ++i) x[i] -= nu_k * grad[i];
        problem.set.project(x);
    }

    const int s = n / 2;
    for (int k = s; k <= n; ++k) {
        double dk = options.zero_delta ? 0.0 : schedules.delta(k, true);
        if (result.constraint_estimates[k - 1] <= dk) result.candidate_set.push_back(k);
    }

    int chosen;
    if (result.candidate_set.empty()) {
        chosen = 1;
    } else {
        std::vector<double> w;
        w.reserve(result.candidate_set.size());
        for (int k : result.candidate_set) w.push_back(rho[k]);
        RngStream idx_rng = rng.substream("index");
        chosen = result.candidate_set[idx_rng.categorical(w.data(), static_cast<int>(w.size()))];
    }
    result.chosen_k = chosen;
    result.solution = result.iterates[chosen - 1];
    return result;
}

}  // namespace cmpg
