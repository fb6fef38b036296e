#include "cmpg/environments.hpp"

#include <cmath>

#include "cmpg/sampling.hpp"

namespace cmpg {

namespace {

void set_uniform_stopping(GameSpec& spec, const HorizonParams& horizon) {
    spec.horizon = horizon.mode;
    spec.episode_len = horizon.mode == HorizonMode::kFixedHorizon ? horizon.episode_len : 0;
    spec.stop_probs.assign(static_cast<size_t>(spec.num_states) * spec.joint_actions(),
                           horizon.kappa);
}

}  // namespace

EnvironmentBundle build_pollution_tax(const PollutionTaxParams& p, const HorizonParams& horizon) {
    const int m = p.num_agents;
    const int S = 2;  // 0 = pollution-free, 1 = polluted
    GameSpec spec;
    spec.num_states = S;
    spec.num_agents = m;
    spec.action_counts.assign(m, 2);  // 0 = clean, 1 = dirty
    spec.objective = Objective::kMaximize;
    spec.threshold = p.alpha;
    spec.initial_dist = {1.0, 0.0};
    set_uniform_stopping(spec, horizon);

    const long long A = spec.joint_actions();
    spec.rewards.assign(m, std::vector<double>(static_cast<size_t>(S) * A, 0.0));
    spec.cost.assign(static_cast<size_t>(S) * A, 0.0);
    spec.transitions.assign(static_cast<size_t>(S) * A * S, 0.0);

    EnvironmentBundle bundle;
    bundle.potential.phi.assign(static_cast<size_t>(S) * A, 0.0);

    JointActionIndexer ix = spec.indexer();
    std::vector<int> digits;
    const double keep = 1.0 - horizon.kappa;
    for (int s = 0; s < S; ++s) {
        double state_tax = s == 1 ? p.tax : 0.0;
        for (long long a = 0; a < A; ++a) {
            ix.decode(static_cast<int>(a), digits);
            int num_clean = 0;
            bool any_dirty = false;
            for (int d : digits) {
                if (d == 0)
                    ++num_clean;
                else
                    any_dirty = true;
            }
            size_t idx = static_cast<size_t>(s) * A + a;
            double profit_sum = 0.0;
            for (int i = 0; i < m; ++i) {
                double profit = digits[i] == 0 ? p.profit_clean : p.profit_dirty;
                spec.rewards[i][idx] = profit - state_tax;
                profit_sum += profit;
            }
            spec.cost[idx] = p.clean_cost * num_clean;
            bundle.potential.phi[idx] = profit_sum - state_tax;
            int next = any_dirty ? 1 : 0;  // polluted iff anyone was dirty
            spec.transitions[idx * S + next] = keep;
        }
    }

    bundle.spec = std::move(spec);
    bundle.maximize = true;
    bundle.id = "pollution_tax";
    return bundle;
}

EnvironmentBundle build_energy_marketplace(const EnergyMarketplaceParams& p,
                                           const HorizonParams& horizon) {
    const int m = p.num_agents;
    const int S = p.num_states;
    GameSpec spec;
    spec.num_states = S;
    spec.num_agents = m;
    spec.action_counts.assign(m, p.num_actions);
    spec.objective = Objective::kMaximize;
    spec.threshold = p.alpha;
    spec.initial_dist.assign(S, 1.0 / S);
    set_uniform_stopping(spec, horizon);

    const long long A = spec.joint_actions();
    spec.rewards.assign(m, std::vector<double>(static_cast<size_t>(S) * A, 0.0));
    spec.cost.assign(static_cast<size_t>(S) * A, 0.0);
    spec.transitions.assign(static_cast<size_t>(S) * A * S, 0.0);

    EnvironmentBundle bundle;
    bundle.potential.phi.assign(static_cast<size_t>(S) * A, 0.0);

    JointActionIndexer ix = spec.indexer();
    std::vector<int> digits;
    const double keep = 1.0 - horizon.kappa;
    const double w_prob = 1.0 / (p.demand_max + 1);
    const bool quadratic = p.variant == EnergyMarketplaceParams::RewardVariant::kQuadratic;
    for (int s = 0; s < S; ++s) {
        const double price_state = std::pow(p.c2, s);
        for (long long a = 0; a < A; ++a) {
            ix.decode(static_cast<int>(a), digits);
            double total = 0.0, sum_sq = 0.0;
            for (int d : digits) {
                total += d;
                sum_sq += static_cast<double>(d) * d;
            }
            double cross = 0.0;
            for (int i = 0; i < m; ++i)
                for (int j = i + 1; j < m; ++j) cross += static_cast<double>(digits[i]) * digits[j];

            size_t idx = static_cast<size_t>(s) * A + a;
            for (int i = 0; i < m; ++i) {
                double ai = digits[i];
                double own = quadratic ? ai * ai : ai;
                spec.rewards[i][idx] = p.c0 * own - p.c1 * own * total - ai * price_state;
            }
            spec.cost[idx] = total;
            bundle.potential.phi[idx] = p.c0 * total - p.c1 * sum_sq - p.c1 * cross - m * price_state;

            // With probability 0.9 the demand level follows total supply
            // minus the random draw w; otherwise it jumps to w directly
            // (clamped into the state range).
            double* row = spec.transitions.data() + idx * S;
            for (int w = 0; w <= p.demand_max; ++w) {
                int follow = std::max(0, std::min(S - 1, static_cast<int>(total) - w));
                int jump = std::min(S - 1, w);
                row[follow] += keep * 0.9 * w_prob;
                row[jump] += keep * 0.1 * w_prob;
            }
        }
    }

    bundle.spec = std::move(spec);
    bundle.maximize = true;
    bundle.id = "energy_marketplace";
    return bundle;
}

EnvironmentBundle build_random_identical_interest(const RandomIdenticalInterestParams& p,
                                                  const HorizonParams& horizon) {
    GameSpec spec;
    spec.num_states = p.num_states;
    spec.num_agents = p.num_agents;
    spec.action_counts.assign(p.num_agents, p.num_actions);
    spec.objective = Objective::kMinimize;  // synthetic payoffs, solver orientation
    spec.threshold = p.alpha;

    HorizonParams h = horizon;
    h.kappa = 1.0 - p.gamma;
    set_uniform_stopping(spec, h);

    const int S = spec.num_states;
    const long long A = spec.joint_actions();
    RngStream rng = RngStream::root(p.seed).substream("random-identical");

    std::vector<double> shared(static_cast<size_t>(S) * A, 0.0);
    RngStream rr = rng.substream("rewards");
    for (double& x : shared) x = rr.uniform();
    spec.rewards.assign(p.num_agents, shared);

    spec.cost.assign(static_cast<size_t>(S) * A, 0.0);
    RngStream rc = rng.substream("costs");
    for (double& x : spec.cost) x = rc.uniform() * p.cost_scale;

    spec.initial_dist.assign(S, 0.0);
    RngStream rmu = rng.substream("initial");
    double mu_total = 0.0;
    for (double& x : spec.initial_dist) {
        x = 0.1 + rmu.uniform();  // bounded away from zero
        mu_total += x;
    }
    for (double& x : spec.initial_dist) x /= mu_total;

    spec.transitions.assign(static_cast<size_t>(S) * A * S, 0.0);
    RngStream rt = rng.substream("transitions");
    const double keep = p.gamma;
    for (long long row = 0; row < static_cast<long long>(S) * A; ++row) {
        double total = 0.0;
        double* out = spec.transitions.data() + row * S;
        for (int t = 0; t < S; ++t) {
            out[t] = 0.05 + rt.uniform();
            total += out[t];
        }
        for (int t = 0; t < S; ++t) out[t] *= keep / total;
    }

    EnvironmentBundle bundle;
    bundle.potential.phi = shared;
    bundle.potential.status = PotentialSpec::Status::kVerified;  // identical interest
    bundle.spec = std::move(spec);
    bundle.maximize = false;
    bundle.id = "random_identical";
    return bundle;
}

EnvironmentBundle build_environment(const std::string& id, const EnvParams& params,
                                    const HorizonParams& horizon) {
    if (id == "pollution_tax")
        return build_pollution_tax(std::get<PollutionTaxParams>(params), horizon);
    if (id == "energy_marketplace")
        return build_energy_marketplace(std::get<EnergyMarketplaceParams>(params), horizon);
    if (id == "random_identical")
        return build_random_identical_interest(std::get<RandomIdenticalInterestParams>(params),
                                               horizon);
    throw std::invalid_argument("unknown environment id: " + id);
}

}  // namespace cmpg
