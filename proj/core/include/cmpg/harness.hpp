#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cmpg/environments.hpp"
#include "cmpg/prox_solver.hpp"

namespace cmpg {

/// One metrics row per recorded outer iteration.
struct RunRecord {
    int t = 0;
    double potential = 0.0;
    double potential_scaled = 0.0;
    double constraint = 0.0;
    std::optional<double> nash_gap;
    double branch_cost_frac = 0.0;
    std::optional<double> wall_s;
    uint64_t seed = 0;
    uint64_t config_hash = 0;
    bool potential_exact = true;
};

/// Experiment description as parsed from a config file. Scalar knobs only;
/// the environment bundle and the solver configuration are assembled on
/// demand so the file round-trips through a canonical text form whose hash
/// identifies the run.
struct ExperimentConfig {
    std::string environment;
    int agents = 2;
    uint64_t seed = 1;
    int reps = 1;
    int cadence = 1;
    std::string outdir = "out";

    // Solver knobs (defaults filled from the environment preset).
    double eta = 0.1;
    double nu = 0.0;
    int batch = 0;
    int inner_iters = 20;
    int outer_iters = 0;
    double xi = 0.1;
    double beta = 0.0;
    double delta = 0.0;
    SolveMode mode = SolveMode::kStochastic;
    GradEstimator estimator = GradEstimator::kPerTrajectoryProduct;
    bool last_iterate = true;
    bool membership_slack = false;  ///< candidate test includes beta - alpha
    double early_stop_tol = 0.0;

    // Horizon.
    HorizonMode horizon = HorizonMode::kFixedHorizon;
    int episode_len = 10;
    double gamma = 0.9;

    // Evaluation.
    bool eval_nash = false;
    enum class PotentialEval { kExact, kSample } potential_eval = PotentialEval::kExact;
    int eval_batch = 1000;
    bool record_wall = false;
    int checkpoint_every = 0;

    // Initial policy: "uniform" or "greedy:<action>".
    std::string init_policy;
    double init_eps = 0.1;

    // Environment parameters (NaN / negative means environment default).
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double profit_clean = 2.0, profit_dirty = 4.0, tax = 4.0, clean_cost = 1.0;
    int states = 5, actions = 5, demand_max = 5;
    double c0 = 2.0, c1 = 0.25, c2 = 1.25;
    std::string reward_variant = "quadratic";
    uint64_t env_seed = 1;
    double cost_scale = 1.0;
};

/// Parses a "key value" config file ('#' comments). Unknown keys are
/// rejected with their line number; missing required keys (environment,
/// seed) and invalid values raise std::runtime_error naming the field.
/// Defaults are filled from the practical preset of the environment.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "config");

/// Canonical text form (sorted keys, full precision); parsing it yields the
/// same canonical text. The config hash is the FNV-1a hash of this text.
std::string write_config(const ExperimentConfig& config);
uint64_t config_hash(const ExperimentConfig& config);

EnvironmentBundle build_configured_environment(const ExperimentConfig& config);
ProxConfig build_prox_config(const ExperimentConfig& config, uint64_t rep_seed);
JointPolicy build_initial_policy(const ExperimentConfig& config, const GameSpec& spec);

/// Writes records as CSV with the fixed header
///   t,potential,potential_scaled,constraint,nash_gap,branch_cost_frac,wall_s,seed
/// (12 significant digits, empty cells for missing optionals).
void write_metrics(const std::vector<RunRecord>& records, const std::string& path);

struct AggregateRow {
    int t = 0;
    double potential_mean = 0.0, potential_std = 0.0;
    double constraint_mean = 0.0, constraint_std = 0.0;
};

/// Per-iteration mean and sample standard deviation across repetitions.
std::vector<AggregateRow> aggregate_records(const std::vector<std::vector<RunRecord>>& reps);
void write_aggregate(const std::vector<AggregateRow>& rows, const std::string& path);

struct ExperimentResult {
    std::vector<std::vector<RunRecord>> repetitions;
    std::vector<AggregateRow> aggregate;
    std::vector<std::string> failures;  ///< one message per failed repetition
    std::string outdir;
    uint64_t config_hash = 0;
    std::string potential_label;  ///< "potential" or "social_welfare"
};

/// Runs reps repetitions with seeds seed+0..seed+reps-1, writes
/// rep_<r>.csv, aggregate.csv and run_info.txt under the output directory.
/// Repetitions run on CMPG_THREADS workers (default 1); outputs are a
/// deterministic function of the config alone. Failed repetitions are
/// recorded and the rest continue.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace cmpg
