#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cmpg/csa.hpp"
#include "oracles.hpp"

using namespace cmpg;
using namespace cmpg::testing;

TEST_CASE("floored-simplex projection: identities and hand values") {
    // Already feasible points are fixed.
    std::vector<double> feasible{0.25, 0.75};
    CHECK(project_floored_simplex(feasible, 0.0) == feasible);
    std::vector<double> floored{0.5, 0.4, 0.1};
    auto p0 = project_floored_simplex(floored, 0.3);  // floor 0.1 met exactly
    for (int i = 0; i < 3; ++i) CHECK(p0[i] == doctest::Approx(floored[i]).epsilon(1e-12));

    auto p1 = project_floored_simplex({2.0, 0.0}, 0.0);
    CHECK(p1[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p1[1] == doctest::Approx(0.0).epsilon(1e-12));

    auto p2 = project_floored_simplex({1.0, 0.0}, 0.2);
    CHECK(p2[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(p2[1] == doctest::Approx(0.1).epsilon(1e-12));

    CHECK_THROWS_AS(project_floored_simplex({0.5, 0.5}, 1.5), std::invalid_argument);

    // xi = 1 collapses to the uniform row.
    auto p3 = project_floored_simplex({9.0, -3.0, 0.1}, 1.0);
    for (double x : p3) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("projection idempotence and KKT on random inputs") {
    RngStream rng = RngStream::root(5);
    for (int trial = 0; trial < 300; ++trial) {
        RngStream t = rng.substream(trial);
        int n = 2 + static_cast<int>(t.next_u64() % 5);
        double xi = (trial % 4 == 0) ? 0.0 : 0.9 * t.uniform();
        std::vector<double> y(n);
        for (double& v : y) v = 4.0 * (t.uniform() - 0.4);
        auto p = project_floored_simplex(y, xi);
        auto pp = project_floored_simplex(p, xi);
        double sum = 0.0;
        const double floor = xi / n;
        double tau = -kInfinity;
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(p[i] - pp[i]) <= 1e-12);
            CHECK(p[i] >= floor - 1e-12);
            sum += p[i];
            if (p[i] > floor + 1e-9) tau = std::max(tau, y[i] - p[i]);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-10);
        for (int i = 0; i < n; ++i) {
            if (p[i] > floor + 1e-9) CHECK(std::abs((y[i] - p[i]) - tau) <= 1e-10);
            else if (tau > -kInfinity) CHECK(y[i] - p[i] <= tau + 1e-10);
        }
    }
}

TEST_CASE("theoretical schedules: equal moduli closed forms and base case") {
    const double mu = 2.0;
    TheoreticalSchedules gen(mu, mu, /*M=*/1.0, /*diam=*/1.0, /*sigma=*/0.0, /*eps=*/0.1);
    // nu_k = 2 / (mu (k+1)) on both branches; A_k = 2 / (k (k+1));
    // rho_k = k (k+1) nu_k / 2 = k / mu.
    TheoreticalSchedules committing = gen;
    for (int k = 1; k <= 12; ++k) {
        CHECK(gen.nu(k, true) == doctest::Approx(2.0 / (mu * (k + 1))).epsilon(1e-12));
        CHECK(gen.nu(k, false) == doctest::Approx(gen.nu(k, true)).epsilon(1e-12));
        double rho = committing.commit(k, k % 2 == 0);  // branch-free when moduli match
        CHECK(rho == doctest::Approx(k / mu).epsilon(1e-12));
        if (k == 1) CHECK(rho == doctest::Approx(gen.nu(1, true)).epsilon(1e-12));
    }

    CsaSchedules mat = gen.materialize(6, 1);
    for (int k = 1; k <= 6; ++k)
        CHECK(mat.rho[k] == doctest::Approx(k / mu).epsilon(1e-12));
}

TEST_CASE("suggested iteration count evaluates the max expression") {
    // mu_F = mu_G = M = diam = sigma = 1, eps = 0.1:
    // max{ 64 / 0.01, sqrt(32) * 10, 32 / 0.01 } = 6400.
    TheoreticalSchedules gen(1.0, 1.0, 1.0, 1.0, 1.0, 0.1);
    CHECK(gen.suggested_iters() == 6400);
    CHECK_THROWS_AS(TheoreticalSchedules(1.0, 1.0, 1.0, 1.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(TheoreticalSchedules(1.0, 1.0, 1.0, 1.0, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("inner_step: fixed point, boundary branch, hand projection") {
    Table anchor(1, 2, 0.5);
    Table zero(1, 2, 0.0);

    Table it = anchor;
    bool branch = inner_step(it, anchor, zero, zero, /*vc=*/0.0, /*nu=*/0.1, /*delta=*/0.0,
                             /*eta=*/0.5, /*alpha=*/1.0, /*beta=*/0.0, /*xi=*/0.0);
    CHECK(branch == true);
    CHECK(it.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(it.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

    // vc + beta - alpha == delta exactly takes the reward branch.
    const double alpha = 2.0, beta = 0.25, delta = 0.5;
    Table it2 = anchor;
    bool reward = inner_step(it2, anchor, zero, zero, alpha - beta + delta, 0.1, delta, 0.5,
                             alpha, beta, 0.0);
    CHECK(reward == true);
    Table it3 = anchor;
    bool above = inner_step(it3, anchor, zero, zero, alpha - beta + delta + 1e-9, 0.1, delta, 0.5,
                            alpha, beta, 0.0);
    CHECK(above == false);

    // pi = (0.5, 0.5), nu = 0.1, reward gradient (1, 0), anchor = pi:
    // project((0.4, 0.5)) = (0.45, 0.55).
    Table g(1, 2, 0.0);
    g.at(0, 0) = 1.0;
    Table it4 = anchor;
    inner_step(it4, anchor, g, zero, 0.0, 0.1, 0.0, 0.5, 1.0, 0.0, 0.0);
    CHECK(it4.at(0, 0) == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(it4.at(0, 1) == doctest::Approx(0.55).epsilon(1e-12));
}

namespace {

InnerProvider constant_provider(const GameSpec& spec, double vc, double g_reward, double g_cost) {
    return [&spec, vc, g_reward, g_cost](const JointPolicy&, int) {
        InnerEstimates est;
        est.vc_hat = vc;
        for (int i = 0; i < spec.num_agents; ++i) {
            est.grad_reward.emplace_back(spec.num_states, spec.action_counts[i], g_reward);
            est.grad_cost.emplace_back(spec.num_states, spec.action_counts[i], g_cost);
        }
        return est;
    };
}

}  // namespace

TEST_CASE("run_inner_loop: no movement under zero gradients, K = 1") {
    GameSpec g = make_random_game(3, 2, 2, 2, 0.9, /*alpha=*/5.0);
    JointPolicy anchor = uniform_policy(g);
    InnerLoopConfig config;
    config.schedules = practical_schedules(1, 0.1, 1);
    config.eta = 0.5;
    config.alpha = 5.0;
    InnerLoopResult res = run_inner_loop(g, anchor, config, constant_provider(g, 0.0, 0.0, 0.0),
                                         RngStream::root(1));
    CHECK(policy_distance(res.output, anchor) == 0.0);
}

TEST_CASE("candidate membership boundary is inclusive") {
    GameSpec g = make_random_game(4, 2, 2, 2, 0.9, /*alpha=*/5.0);
    JointPolicy anchor = uniform_policy(g);
    InnerLoopConfig config;
    config.schedules = practical_schedules(4, 0.01, 1);
    config.schedules.delta.assign(5, 1.5);
    config.eta = 0.5;
    config.alpha = 5.0;
    config.last_iterate = false;
    // Estimates equal to delta exactly: every k from floor(K/2) qualifies.
    InnerLoopResult res = run_inner_loop(g, anchor, config, constant_provider(g, 1.5, 0.0, 0.0),
                                         RngStream::root(2));
    CHECK(res.candidate_set == std::vector<int>{2, 3, 4});
}

TEST_CASE("selected index follows the rho weights") {
    GameSpec g = make_random_game(5, 1, 1, 2, 0.9, /*alpha=*/5.0);
    JointPolicy anchor = uniform_policy(g);
    InnerLoopConfig config;
    const int K = 9;
    config.schedules = practical_schedules(K, 0.01, 1);
    config.schedules.delta.assign(K + 1, 0.0);
    for (int k = 0; k <= K; ++k) config.schedules.rho[k] = k;  // proportional to k
    config.eta = 0.5;
    config.alpha = 5.0;
    config.last_iterate = false;

    // Cost identically zero: every estimate is 0 <= delta, so the candidate
    // set is {4..9} and k_hat is sampled proportionally to rho.
    InnerProvider provider = constant_provider(g, 0.0, 0.0, 0.0);
    std::vector<int> counts(K + 1, 0);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        InnerLoopResult res =
            run_inner_loop(g, anchor, config, provider, RngStream::root(100 + d));
        ++counts[res.chosen_k];
    }
    for (int k = 0; k < 4; ++k) CHECK(counts[k] == 0);
    std::vector<int> observed(counts.begin() + 4, counts.end());
    double total_rho = 4 + 5 + 6 + 7 + 8 + 9;
    std::vector<double> probs;
    for (int k = 4; k <= 9; ++k) probs.push_back(k / total_rho);
    // Chi-square with 5 dof at significance 0.001.
    CHECK(chi_square(observed, probs) < 20.515);
}

TEST_CASE("empty candidate set falls back to the first iterate") {
    GameSpec g = make_random_game(6, 2, 2, 2, 0.9, /*alpha=*/1.0);
    JointPolicy anchor = uniform_policy(g);
    InnerLoopConfig config;
    config.schedules = practical_schedules(6, 0.05, 1);
    config.eta = 0.5;
    config.alpha = 1.0;
    config.last_iterate = false;
    // Constraint estimate far above delta = 0: no candidates.
    InnerLoopResult res = run_inner_loop(g, anchor, config, constant_provider(g, 3.0, 0.2, 0.1),
                                         RngStream::root(4));
    CHECK(res.candidate_set.empty());
    CHECK(res.chosen_k == 1);
}

// ---------------------------------------------------------------------------
// Generic solver on the closed-form quadratic problem
// ---------------------------------------------------------------------------

namespace {

GenericCsaProblem quadratic_problem(double noise, double* sigma_out = nullptr) {
    GenericCsaProblem p;
    p.set = FeasibleSet::box({-2.0}, {2.0});
    p.mu_f = 2.0;
    p.mu_g = 2.0;
    p.bound_m = 6.0;  // max |g'| = |2 (x - 1)| on [-2, 2]
    p.sigma = noise;
    p.f_max = 4.0;
    p.objective_grad = [noise](const std::vector<double>& x, RngStream& r,
                               std::vector<double>& g) {
        g[0] = 2.0 * x[0] + (noise > 0 ? noise * (2.0 * r.uniform() - 1.0) : 0.0);
    };
    p.constraint_grad = [noise](const std::vector<double>& x, RngStream& r,
                                std::vector<double>& g) {
        g[0] = 2.0 * (x[0] - 1.0) + (noise > 0 ? noise * (2.0 * r.uniform() - 1.0) : 0.0);
    };
    p.constraint_value = [noise](const std::vector<double>& x, RngStream& r) {
        double g = (x[0] - 1.0) * (x[0] - 1.0) - 0.25;
        return g + (noise > 0 ? noise * (2.0 * r.uniform() - 1.0) : 0.0);
    };
    if (sigma_out) *sigma_out = noise;
    return p;
}

double f_of(const std::vector<double>& x) { return x[0] * x[0]; }
double g_of(const std::vector<double>& x) { return (x[0] - 1.0) * (x[0] - 1.0) - 0.25; }

}  // namespace

TEST_CASE("generic solver converges on the quadratic problem with exact oracles") {
    GenericCsaProblem p = quadratic_problem(0.0);
    TheoreticalSchedules sched(p.mu_f, p.mu_g, p.bound_m, p.set.diameter(), 0.0, 0.01, p.f_max);
    CsaGenericOptions opts;
    opts.num_iters = 2000;
    opts.batch_j = 1;
    opts.zero_delta = true;  // exact oracles need no estimate slack
    CsaGenericResult res = csa_generic(p, sched, {1.0}, opts, RngStream::root(10));
    CHECK(std::abs(f_of(res.solution) - 0.25) <= 1e-2);
    CHECK(g_of(res.solution) <= 1e-2);
}

TEST_CASE("inactive constraint reduces to projected gradient descent") {
    GenericCsaProblem p = quadratic_problem(0.0);
    p.constraint_value = [](const std::vector<double>&, RngStream&) { return -1.0; };
    p.constraint_grad = [](const std::vector<double>&, RngStream&, std::vector<double>& g) {
        g[0] = 0.0;
    };
    TheoreticalSchedules sched(p.mu_f, p.mu_g, p.bound_m, p.set.diameter(), 0.0, 0.01, p.f_max);
    CsaGenericOptions opts;
    opts.num_iters = 4000;
    opts.batch_j = 1;
    opts.zero_delta = true;
    CsaGenericResult res = csa_generic(p, sched, {1.5}, opts, RngStream::root(11));
    CHECK(std::abs(res.solution[0]) <= 1e-2);  // unconstrained minimizer of x^2
    for (char b : res.cost_branch) CHECK(b == 0);
}

TEST_CASE("infeasible start is rejected") {
    GenericCsaProblem p = quadratic_problem(0.0);
    TheoreticalSchedules sched(p.mu_f, p.mu_g, p.bound_m, p.set.diameter(), 0.0, 0.01, p.f_max);
    CsaGenericOptions opts;
    opts.num_iters = 100;
    opts.batch_j = 1;
    CHECK_THROWS_AS(csa_generic(p, sched, {-2.0}, opts, RngStream::root(12)), InfeasibleError);
}

TEST_CASE("noisy oracles keep the empirical 1/K gap trend") {
    double gap_1000 = 0.0, gap_4000 = 0.0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
        GenericCsaProblem p = quadratic_problem(0.5);
        TheoreticalSchedules sched(p.mu_f, p.mu_g, p.bound_m, p.set.diameter(), p.sigma, 0.05,
                                   p.f_max);
        CsaGenericOptions opts;
        opts.batch_j = 100;
        opts.zero_delta = true;
        opts.init_feasibility_eps = 0.2;  // noisy estimate at the feasible start
        opts.num_iters = 1000;
        CsaGenericResult r1 = csa_generic(p, sched, {1.0}, opts, RngStream::root(900 + s));
        opts.num_iters = 4000;
        CsaGenericResult r4 = csa_generic(p, sched, {1.0}, opts, RngStream::root(900 + s));
        gap_1000 += std::abs(f_of(r1.solution) - 0.25);
        gap_4000 += std::abs(f_of(r4.solution) - 0.25);
    }
    gap_1000 /= seeds;
    gap_4000 /= seeds;
    // Expected quarter of the K = 1000 gap, asserted within factor 3.
    CHECK(gap_4000 <= 3.0 * gap_1000 / 4.0);
}

TEST_CASE("feasibility pressure: constraint branch stays below half on the boundary problem") {
    GenericCsaProblem p = quadratic_problem(0.0);
    TheoreticalSchedules sched(p.mu_f, p.mu_g, p.bound_m, p.set.diameter(), 0.0, 0.01, p.f_max);
    CsaGenericOptions opts;
    opts.num_iters = 4000;
    opts.batch_j = 1;
    opts.zero_delta = true;
    CsaGenericResult res = csa_generic(p, sched, {1.0}, opts, RngStream::root(13));
    int cost_steps = 0, total = 0;
    for (size_t k = res.cost_branch.size() / 2; k < res.cost_branch.size(); ++k) {
        cost_steps += res.cost_branch[k];
        ++total;
    }
    CHECK(cost_steps <= total / 2);
}
