#pragma once

#include <string>
#include <variant>

#include "cmpg/equilibrium.hpp"
#include "cmpg/types.hpp"

namespace cmpg {

struct HorizonParams {
    HorizonMode mode = HorizonMode::kFixedHorizon;
    int episode_len = 10;
    double kappa = 0.1;  ///< uniform stop probability; gamma = 1 - kappa
};

/// Two-state pollution game: everyone produces at low (clean) or high
/// (dirty) volume, the world is polluted next step iff anyone was dirty,
/// rewards are production profit minus a state pollution tax, and the
/// shared cost charges C per agent producing clean, bounded by alpha to
/// keep total production up.
struct PollutionTaxParams {
    int num_agents = 2;
    double profit_clean = 2.0;  // P_c
    double profit_dirty = 4.0;  // P_d
    double tax = 4.0;           // T_p, charged in the polluted state
    double clean_cost = 1.0;    // C
    double alpha = 12.0;        // alpha_C
};

/// Energy trading game: states are grid demand levels, actions are units
/// contributed, profit depends on own contribution, total supply and the
/// demand state, the next state follows total contribution minus a random
/// demand draw, and the shared cost is the total energy provided.
struct EnergyMarketplaceParams {
    int num_agents = 2;
    int num_states = 5;   // S
    int num_actions = 5;  // A
    int demand_max = 5;   // W, demand draw is uniform on {0..W}
    double c0 = 2.0;
    double c1 = 0.25;
    double c2 = 1.25;
    double alpha = 16.0;  // alpha_e
    /// Profit form: quadratic has own-contribution terms entering squared
    /// (the default), linear uses degree-1 terms (Cournot-style price).
    /// Neither matches the shipped potential table exactly under the
    /// potential-identity check (see verify_mpg), so the flag stays and the
    /// literal quadratic form is the default.
    enum class RewardVariant { kLinear, kQuadratic } variant = RewardVariant::kQuadratic;
};

/// Seeded generator of identical-interest games with uniform random shared
/// rewards in [0,1], costs in [0, cost_scale] and random dynamics. The
/// shared reward is an exact potential by construction.
struct RandomIdenticalInterestParams {
    int num_agents = 2;
    int num_states = 2;
    int num_actions = 2;
    uint64_t seed = 1;
    double cost_scale = 1.0;
    double alpha = kInfinity;
    double gamma = 0.9;
};

using EnvParams =
    std::variant<PollutionTaxParams, EnergyMarketplaceParams, RandomIdenticalInterestParams>;

/// A built game with its candidate potential and declared orientation.
/// maximize-direction games must be normalized before optimization; the
/// flag preserves the display orientation of potential traces.
struct EnvironmentBundle {
    GameSpec spec;
    PotentialSpec potential;
    bool maximize = false;
    std::string id;
    /// When set, the potential table is a stand-in (the per-step social
    /// welfare) rather than a candidate joint potential.
    bool potential_is_welfare = false;
};

EnvironmentBundle build_pollution_tax(const PollutionTaxParams& params,
                                      const HorizonParams& horizon);
EnvironmentBundle build_energy_marketplace(const EnergyMarketplaceParams& params,
                                           const HorizonParams& horizon);
EnvironmentBundle build_random_identical_interest(const RandomIdenticalInterestParams& params,
                                                  const HorizonParams& horizon);

/// Dispatch by environment id: "pollution_tax", "energy_marketplace" or
/// "random_identical". Throws std::invalid_argument for unknown ids.
EnvironmentBundle build_environment(const std::string& id, const EnvParams& params,
                                    const HorizonParams& horizon);

}  // namespace cmpg
