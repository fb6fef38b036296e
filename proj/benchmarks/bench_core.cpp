#include <benchmark/benchmark.h>

#include "cmpg/csa.hpp"
#include "cmpg/environments.hpp"
#include "cmpg/equilibrium.hpp"
#include "cmpg/game_core.hpp"
#include "cmpg/sampling.hpp"

namespace {

using namespace cmpg;

EnvironmentBundle marketplace(int agents) {
    HorizonParams h;
    h.mode = HorizonMode::kRandomStopping;
    EnergyMarketplaceParams p;
    p.num_agents = agents;
    return build_energy_marketplace(p, h);
}

void BM_ExactValue(benchmark::State& state) {
    EnvironmentBundle env = marketplace(static_cast<int>(state.range(0)));
    JointPolicy pi = uniform_policy(env.spec);
    for (auto _ : state) {
        ValueReport v = exact_value_cost(env.spec, pi);
        benchmark::DoNotOptimize(v.at_initial);
    }
}
BENCHMARK(BM_ExactValue)->Arg(2)->Arg(3)->Arg(4);

void BM_PolicyGradient(benchmark::State& state) {
    EnvironmentBundle env = marketplace(static_cast<int>(state.range(0)));
    JointPolicy pi = uniform_policy(env.spec);
    for (auto _ : state) {
        GradientTable g = exact_policy_gradient_all(env.spec, pi, env.spec.cost);
        benchmark::DoNotOptimize(g.slices[0].v.data());
    }
}
BENCHMARK(BM_PolicyGradient)->Arg(2)->Arg(3)->Arg(4);

void BM_SampleEpisode(benchmark::State& state) {
    EnvironmentBundle env = marketplace(2);
    env.spec.horizon = HorizonMode::kFixedHorizon;
    env.spec.episode_len = 10;
    JointPolicy pi = uniform_policy(env.spec);
    RngStream rng = RngStream::root(1);
    uint64_t i = 0;
    for (auto _ : state) {
        Trajectory tr = sample_episode(env.spec, pi, rng.substream(i++));
        benchmark::DoNotOptimize(tr.states.data());
    }
}
BENCHMARK(BM_SampleEpisode);

void BM_EstimateBatch(benchmark::State& state) {
    EnvironmentBundle env = marketplace(2);
    env.spec.horizon = HorizonMode::kFixedHorizon;
    env.spec.episode_len = 10;
    JointPolicy pi = uniform_policy(env.spec);
    const int batch = static_cast<int>(state.range(0));
    uint64_t i = 0;
    for (auto _ : state) {
        BatchEstimateAll est = estimate_batch_all(env.spec, pi, batch, RngStream::root(i++),
                                                  GradEstimator::kPerTrajectoryProduct);
        benchmark::DoNotOptimize(est.value_cost);
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_EstimateBatch)->Arg(100)->Arg(1000);

void BM_ProjectFlooredSimplex(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::vector<double> y(n), scratch;
    RngStream rng = RngStream::root(7);
    for (double& v : y) v = 2.0 * rng.uniform() - 0.5;
    std::vector<double> work = y;
    for (auto _ : state) {
        work = y;
        project_floored_simplex_inplace(work.data(), n, 0.1, scratch);
        benchmark::DoNotOptimize(work.data());
    }
}
BENCHMARK(BM_ProjectFlooredSimplex)->Arg(5)->Arg(50);

void BM_BestResponseLp(benchmark::State& state) {
    EnvironmentBundle env = marketplace(2);
    JointPolicy pi = uniform_policy(env.spec);
    for (auto _ : state) {
        BestResponse br = best_response_feasible_value(env.spec, pi, 0);
        benchmark::DoNotOptimize(br.value);
    }
}
BENCHMARK(BM_BestResponseLp);

}  // namespace

BENCHMARK_MAIN();
