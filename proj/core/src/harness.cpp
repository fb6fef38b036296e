#include "cmpg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "cmpg/equilibrium.hpp"
#include "cmpg/spec_io.hpp"

namespace cmpg {

namespace {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

uint64_t fnv1a(const std::string& text) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

struct KeyValue {
    std::string key, value;
    int line = 0;
};

std::vector<KeyValue> tokenize_config(const std::string& text, const std::string& origin) {
    std::vector<KeyValue> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key, value, extra;
        if (!(ls >> key)) continue;
        if (!(ls >> value))
            throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                     ": key '" + key + "' has no value");
        if (ls >> extra)
            throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                     ": unexpected trailing token '" + extra + "'");
        out.push_back({key, value, line_no});
    }
    return out;
}

double parse_double(const KeyValue& kv) {
    if (kv.value == "inf") return kInfinity;
    try {
        size_t pos = 0;
        double v = std::stod(kv.value, &pos);
        if (pos != kv.value.size()) throw std::invalid_argument(kv.value);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("field '" + kv.key + "': expected a number, got '" + kv.value + "'");
    }
}

long long parse_int(const KeyValue& kv) {
    double v = parse_double(kv);
    if (v != std::floor(v))
        throw std::runtime_error("field '" + kv.key + "': expected an integer");
    return static_cast<long long>(v);
}

bool parse_bool(const KeyValue& kv) {
    if (kv.value == "true" || kv.value == "1") return true;
    if (kv.value == "false" || kv.value == "0") return false;
    throw std::runtime_error("field '" + kv.key + "': expected true or false");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    bool saw_environment = false, saw_seed = false;
    bool saw_nu = false, saw_batch = false, saw_outer = false, saw_inner = false, saw_init_eps = false, saw_beta = false;
    bool saw_eta = false, saw_xi = false, saw_init = false, saw_horizon = false;

    for (const KeyValue& kv : tokenize_config(text, origin)) {
        const std::string& k = kv.key;
        if (k == "environment") { cfg.environment = kv.value; saw_environment = true; }
        else if (k == "agents") cfg.agents = static_cast<int>(parse_int(kv));
        else if (k == "seed") { cfg.seed = static_cast<uint64_t>(parse_int(kv)); saw_seed = true; }
        else if (k == "reps") cfg.reps = static_cast<int>(parse_int(kv));
        else if (k == "cadence") cfg.cadence = static_cast<int>(parse_int(kv));
        else if (k == "outdir") cfg.outdir = kv.value;
        else if (k == "eta") { cfg.eta = parse_double(kv); saw_eta = true; }
        else if (k == "nu") { cfg.nu = parse_double(kv); saw_nu = true; }
        else if (k == "batch") { cfg.batch = static_cast<int>(parse_int(kv)); saw_batch = true; }
        else if (k == "inner_iters") { cfg.inner_iters = static_cast<int>(parse_int(kv)); saw_inner = true; }
        else if (k == "outer_iters") { cfg.outer_iters = static_cast<int>(parse_int(kv)); saw_outer = true; }
        else if (k == "xi") { cfg.xi = parse_double(kv); saw_xi = true; }
        else if (k == "beta") { cfg.beta = parse_double(kv); saw_beta = true; }
        else if (k == "delta") cfg.delta = parse_double(kv);
        else if (k == "mode") {
            if (kv.value == "exact") cfg.mode = SolveMode::kExact;
            else if (kv.value == "stochastic") cfg.mode = SolveMode::kStochastic;
            else throw std::runtime_error("field 'mode': expected exact or stochastic");
        } else if (k == "estimator") {
            if (kv.value == "per_trajectory") cfg.estimator = GradEstimator::kPerTrajectoryProduct;
            else if (kv.value == "batch_means") cfg.estimator = GradEstimator::kBatchMeanProduct;
            else throw std::runtime_error("field 'estimator': expected per_trajectory or batch_means");
        } else if (k == "last_iterate") cfg.last_iterate = parse_bool(kv);
        else if (k == "membership_slack") cfg.membership_slack = parse_bool(kv);
        else if (k == "early_stop_tol") cfg.early_stop_tol = parse_double(kv);
        else if (k == "horizon") {
            if (kv.value == "fixed") cfg.horizon = HorizonMode::kFixedHorizon;
            else if (kv.value == "random") cfg.horizon = HorizonMode::kRandomStopping;
            else throw std::runtime_error("field 'horizon': expected fixed or random");
            saw_horizon = true;
        } else if (k == "episode_len") cfg.episode_len = static_cast<int>(parse_int(kv));
        else if (k == "gamma") cfg.gamma = parse_double(kv);
        else if (k == "eval_nash") cfg.eval_nash = parse_bool(kv);
        else if (k == "potential_eval") {
            if (kv.value == "exact") cfg.potential_eval = ExperimentConfig::PotentialEval::kExact;
            else if (kv.value == "sample") cfg.potential_eval = ExperimentConfig::PotentialEval::kSample;
            else throw std::runtime_error("field 'potential_eval': expected exact or sample");
        } else if (k == "eval_batch") cfg.eval_batch = static_cast<int>(parse_int(kv));
        else if (k == "record_wall") cfg.record_wall = parse_bool(kv);
        else if (k == "checkpoint_every") cfg.checkpoint_every = static_cast<int>(parse_int(kv));
        else if (k == "init_policy") { cfg.init_policy = kv.value; saw_init = true; }
        else if (k == "init_eps") { cfg.init_eps = parse_double(kv); saw_init_eps = true; }
        else if (k == "alpha") cfg.alpha = parse_double(kv);
        else if (k == "profit_clean") cfg.profit_clean = parse_double(kv);
        else if (k == "profit_dirty") cfg.profit_dirty = parse_double(kv);
        else if (k == "tax") cfg.tax = parse_double(kv);
        else if (k == "clean_cost") cfg.clean_cost = parse_double(kv);
        else if (k == "states") cfg.states = static_cast<int>(parse_int(kv));
        else if (k == "actions") cfg.actions = static_cast<int>(parse_int(kv));
        else if (k == "demand_max") cfg.demand_max = static_cast<int>(parse_int(kv));
        else if (k == "c0") cfg.c0 = parse_double(kv);
        else if (k == "c1") cfg.c1 = parse_double(kv);
        else if (k == "c2") cfg.c2 = parse_double(kv);
        else if (k == "reward_variant") {
            if (kv.value != "linear" && kv.value != "quadratic")
                throw std::runtime_error("field 'reward_variant': expected linear or quadratic");
            cfg.reward_variant = kv.value;
        } else if (k == "env_seed") cfg.env_seed = static_cast<uint64_t>(parse_int(kv));
        else if (k == "cost_scale") cfg.cost_scale = parse_double(kv);
        else
            throw std::runtime_error(origin + ":" + std::to_string(kv.line) +
                                     ": unknown key '" + k + "'");
    }

    if (!saw_environment || !saw_seed) {
        std::string missing;
        if (!saw_environment) missing += " environment";
        if (!saw_seed) missing += " seed";
        throw std::runtime_error("config is missing required keys:" + missing);
    }

    // Preset defaults for knobs the file left out.
    ProxConfig preset = practical_config(cfg.environment, cfg.agents);
    if (!saw_eta) cfg.eta = preset.eta;
    if (!saw_nu) cfg.nu = preset.schedules.nu[0];
    if (!saw_batch) cfg.batch = preset.schedules.batch_size;
    if (!saw_inner) cfg.inner_iters = preset.schedules.num_iters;
    if (!saw_outer) cfg.outer_iters = preset.outer_iters;
    if (!saw_xi) cfg.xi = preset.xi;
    if (!saw_beta) cfg.beta = preset.schedules.beta;
    if (!saw_init) {
        if (cfg.environment == "pollution_tax") {
            // Clean-leaning but strictly feasible start. The cost of a
            // clean probability p is clean_cost * agents * episodes * p, so
            // the feasible ceiling shrinks with the number of agents.
            cfg.init_policy = "greedy:0";
            if (!saw_init_eps) {
                double alpha = std::isnan(cfg.alpha) ? 12.0 : cfg.alpha;
                double expected_len = cfg.horizon == HorizonMode::kFixedHorizon
                                          ? cfg.episode_len
                                          : 1.0 / (1.0 - cfg.gamma);
                double ceiling = alpha / std::max(1e-9, cfg.clean_cost * cfg.agents * expected_len);
                double p_clean = std::min(0.55, 0.9 * ceiling);
                cfg.init_eps = std::clamp(1.0 - p_clean, 0.0, 0.999);
            }
        } else if (cfg.environment == "energy_marketplace") {
            cfg.init_policy = "greedy:0";  // contribute nothing, cost zero
        } else {
            cfg.init_policy = "uniform";
        }
    }
    if (!saw_horizon && cfg.environment == "random_identical")
        cfg.horizon = HorizonMode::kRandomStopping;

    // Validation with field names.
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::runtime_error(std::string("invalid config: ") + what);
    };
    require(cfg.agents >= 1, "agents must be >= 1");
    require(cfg.reps >= 1, "reps must be >= 1");
    require(cfg.cadence >= 1, "cadence must be >= 1");
    require(cfg.eta > 0.0, "eta must be positive");
    require(cfg.nu > 0.0, "nu must be positive");
    require(cfg.batch >= 1, "batch must be >= 1");
    require(cfg.inner_iters >= 1, "inner_iters must be >= 1");
    require(cfg.outer_iters >= 0, "outer_iters must be >= 0");
    require(cfg.xi >= 0.0 && cfg.xi < 1.0, "xi must lie in [0, 1)");
    require(cfg.beta >= 0.0, "beta must be >= 0");
    require(cfg.gamma > 0.0 && cfg.gamma < 1.0, "gamma must lie in (0, 1)");
    require(cfg.episode_len >= 1, "episode_len must be >= 1");
    require(cfg.eval_batch >= 1, "eval_batch must be >= 1");
    require(cfg.init_eps >= 0.0 && cfg.init_eps < 1.0, "init_eps must lie in [0, 1)");
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string write_config(const ExperimentConfig& c) {
    std::map<std::string, std::string> kv;
    kv["environment"] = c.environment;
    kv["agents"] = std::to_string(c.agents);
    kv["seed"] = std::to_string(c.seed);
    kv["reps"] = std::to_string(c.reps);
    kv["cadence"] = std::to_string(c.cadence);
    kv["outdir"] = c.outdir;
    kv["eta"] = format_full(c.eta);
    kv["nu"] = format_full(c.nu);
    kv["batch"] = std::to_string(c.batch);
    kv["inner_iters"] = std::to_string(c.inner_iters);
    kv["outer_iters"] = std::to_string(c.outer_iters);
    kv["xi"] = format_full(c.xi);
    kv["beta"] = format_full(c.beta);
    kv["delta"] = format_full(c.delta);
    kv["mode"] = c.mode == SolveMode::kExact ? "exact" : "stochastic";
    kv["estimator"] = c.estimator == GradEstimator::kPerTrajectoryProduct ? "per_trajectory"
                                                                          : "batch_means";
    kv["last_iterate"] = c.last_iterate ? "true" : "false";
    kv["membership_slack"] = c.membership_slack ? "true" : "false";
    kv["early_stop_tol"] = format_full(c.early_stop_tol);
    kv["horizon"] = c.horizon == HorizonMode::kFixedHorizon ? "fixed" : "random";
    kv["episode_len"] = std::to_string(c.episode_len);
    kv["gamma"] = format_full(c.gamma);
    kv["eval_nash"] = c.eval_nash ? "true" : "false";
    kv["potential_eval"] =
        c.potential_eval == ExperimentConfig::PotentialEval::kExact ? "exact" : "sample";
    kv["eval_batch"] = std::to_string(c.eval_batch);
    kv["record_wall"] = c.record_wall ? "true" : "false";
    kv["checkpoint_every"] = std::to_string(c.checkpoint_every);
    kv["init_policy"] = c.init_policy;
    kv["init_eps"] = format_full(c.init_eps);
    if (!std::isnan(c.alpha)) kv["alpha"] = format_full(c.alpha);
    if (c.environment == "pollution_tax") {
        kv["profit_clean"] = format_full(c.profit_clean);
        kv["profit_dirty"] = format_full(c.profit_dirty);
        kv["tax"] = format_full(c.tax);
        kv["clean_cost"] = format_full(c.clean_cost);
    } else if (c.environment == "energy_marketplace") {
        kv["states"] = std::to_string(c.states);
        kv["actions"] = std::to_string(c.actions);
        kv["demand_max"] = std::to_string(c.demand_max);
        kv["c0"] = format_full(c.c0);
        kv["c1"] = format_full(c.c1);
        kv["c2"] = format_full(c.c2);
        kv["reward_variant"] = c.reward_variant;
    } else if (c.environment == "random_identical") {
        kv["env_seed"] = std::to_string(c.env_seed);
        kv["cost_scale"] = format_full(c.cost_scale);
        kv["states"] = std::to_string(c.states);
        kv["actions"] = std::to_string(c.actions);
    }
    std::string out;
    for (const auto& [key, value] : kv) out += key + " " + value + "\n";
    return out;
}

uint64_t config_hash(const ExperimentConfig& config) { return fnv1a(write_config(config)); }

EnvironmentBundle build_configured_environment(const ExperimentConfig& c) {
    HorizonParams horizon;
    horizon.mode = c.horizon;
    horizon.episode_len = c.episode_len;
    horizon.kappa = 1.0 - c.gamma;

    if (c.environment == "pollution_tax") {
        PollutionTaxParams p;
        p.num_agents = c.agents;
        p.profit_clean = c.profit_clean;
        p.profit_dirty = c.profit_dirty;
        p.tax = c.tax;
        p.clean_cost = c.clean_cost;
        if (!std::isnan(c.alpha)) p.alpha = c.alpha;
        return build_pollution_tax(p, horizon);
    }
    if (c.environment == "energy_marketplace") {
        EnergyMarketplaceParams p;
        p.num_agents = c.agents;
        p.num_states = c.states;
        p.num_actions = c.actions;
        p.demand_max = c.demand_max;
        p.c0 = c.c0;
        p.c1 = c.c1;
        p.c2 = c.c2;
        if (!std::isnan(c.alpha)) p.alpha = c.alpha;
        p.variant = c.reward_variant == "quadratic"
                        ? EnergyMarketplaceParams::RewardVariant::kQuadratic
                        : EnergyMarketplaceParams::RewardVariant::kLinear;
        return build_energy_marketplace(p, horizon);
    }
    if (c.environment == "random_identical") {
        RandomIdenticalInterestParams p;
        p.num_agents = c.agents;
        p.num_states = c.states;
        p.num_actions = c.actions;
        p.seed = c.env_seed;
        p.cost_scale = c.cost_scale;
        p.gamma = c.gamma;
        if (!std::isnan(c.alpha)) p.alpha = c.alpha;
        return build_random_identical_interest(p, horizon);
    }
    throw std::invalid_argument("unknown environment id: " + c.environment);
}

ProxConfig build_prox_config(const ExperimentConfig& c, uint64_t rep_seed) {
    ProxConfig prox;
    prox.environment = c.environment;
    prox.eta = c.eta;
    prox.xi = c.xi;
    prox.outer_iters = c.outer_iters;
    prox.mode = c.mode;
    prox.estimator = c.estimator;
    prox.seed = rep_seed;
    prox.early_stop_tol = c.early_stop_tol;
    prox.last_iterate = c.last_iterate;
    prox.membership_includes_slack = c.membership_slack;
    prox.schedules = practical_schedules(c.inner_iters, c.nu, c.batch, c.beta);
    if (c.delta != 0.0)
        prox.schedules.delta.assign(c.inner_iters + 1, c.delta);
    return prox;
}

JointPolicy build_initial_policy(const ExperimentConfig& c, const GameSpec& spec) {
    JointPolicy pi;
    if (c.init_policy == "uniform") {
        pi = uniform_policy(spec, c.xi);
    } else if (c.init_policy.rfind("greedy:", 0) == 0) {
        int action = std::stoi(c.init_policy.substr(7));
        pi.xi = c.xi;
        pi.agents.reserve(spec.num_agents);
        for (int i = 0; i < spec.num_agents; ++i) {
            int a = spec.action_counts[i];
            // Both the greedy entry (1 - eps) and the spread entries
            // (eps / (A - 1)) must respect the floor xi / A.
            double eps = c.init_eps;
            if (a > 1) eps = std::clamp(eps, c.xi * (a - 1) / a, 1.0 - c.xi / a);
            int star = std::min(action, a - 1);
            Table t(spec.num_states, a, a > 1 ? eps / (a - 1) : 0.0);
            for (int s = 0; s < spec.num_states; ++s) t.at(s, star) = a > 1 ? 1.0 - eps : 1.0;
            pi.agents.push_back(std::move(t));
        }
    } else {
        throw std::runtime_error("init_policy must be uniform or greedy:<action>");
    }
    auto problems = validate_policy(spec, pi);
    if (!problems.empty()) throw std::runtime_error("initial policy invalid: " + problems[0]);
    return pi;
}

void write_metrics(const std::vector<RunRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metrics file: " + path);
    out << "t,potential,potential_scaled,constraint,nash_gap,branch_cost_frac,wall_s,seed\n";
    for (const RunRecord& r : records) {
        out << r.t << ',' << format_number(r.potential) << ',' << format_number(r.potential_scaled)
            << ',' << format_number(r.constraint) << ',';
        if (r.nash_gap) out << format_number(*r.nash_gap);
        out << ',' << format_number(r.branch_cost_frac) << ',';
        if (r.wall_s) out << format_number(*r.wall_s);
        out << ',' << r.seed << "\n";
    }
    if (!out) throw std::runtime_error("short write to metrics file: " + path);
}

std::vector<AggregateRow> aggregate_records(const std::vector<std::vector<RunRecord>>& reps) {
    std::vector<AggregateRow> rows;
    if (reps.empty()) return rows;
    size_t n = reps[0].size();
    for (const auto& r : reps) n = std::min(n, r.size());
    for (size_t i = 0; i < n; ++i) {
        AggregateRow row;
        row.t = reps[0][i].t;
        double sp = 0, sp2 = 0, sc = 0, sc2 = 0;
        for (const auto& r : reps) {
            sp += r[i].potential;
            sp2 += r[i].potential * r[i].potential;
            sc += r[i].constraint;
            sc2 += r[i].constraint * r[i].constraint;
        }
        const double m = static_cast<double>(reps.size());
        row.potential_mean = sp / m;
        row.constraint_mean = sc / m;
        if (reps.size() > 1) {
            row.potential_std =
                std::sqrt(std::max(0.0, (sp2 - sp * sp / m) / (m - 1)));
            row.constraint_std =
                std::sqrt(std::max(0.0, (sc2 - sc * sc / m) / (m - 1)));
        }
        rows.push_back(row);
    }
    return rows;
}

void write_aggregate(const std::vector<AggregateRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write aggregate file: " + path);
    out << "t,potential_mean,potential_std,constraint_mean,constraint_std\n";
    for (const AggregateRow& r : rows)
        out << r.t << ',' << format_number(r.potential_mean) << ',' << format_number(r.potential_std)
            << ',' << format_number(r.constraint_mean) << ',' << format_number(r.constraint_std)
            << "\n";
}

namespace {

/// Monte-Carlo estimate of the expected cumulative potential and cost.
std::pair<double, double> sampled_potential_and_cost(const GameSpec& spec,
                                                     const PotentialSpec& potential,
                                                     const JointPolicy& policy, int batch,
                                                     RngStream rng) {
    const long long A = spec.joint_actions();
    double sum_phi = 0.0, sum_cost = 0.0;
    for (int b = 0; b < batch; ++b) {
        Trajectory tr = sample_episode(spec, policy, rng.substream(static_cast<uint64_t>(b)));
        for (int t = 0; t < tr.length(); ++t)
            sum_phi += potential.phi[static_cast<size_t>(tr.states[t]) * A + tr.actions[t]];
        sum_cost += tr.total_cost();
    }
    return {sum_phi / batch, sum_cost / batch};
}

struct RepOutcome {
    std::vector<RunRecord> records;
    std::string error;
};

RepOutcome run_repetition(const ExperimentConfig& cfg, const EnvironmentBundle& env,
                          int rep_index, uint64_t hash, const std::string& outdir) {
    RepOutcome outcome;
    const uint64_t rep_seed = cfg.seed + static_cast<uint64_t>(rep_index);
    try {
        ProxConfig prox = build_prox_config(cfg, rep_seed);
        JointPolicy pi0 = build_initial_policy(cfg, env.spec);

        std::optional<EnvironmentBundle> eval_env;
        if (cfg.eval_nash) {
            ExperimentConfig diag = cfg;
            diag.horizon = HorizonMode::kRandomStopping;
            eval_env = build_configured_environment(diag);
        }

        std::vector<std::pair<int, JointPolicy>> snapshots;
        MetricHook hook = [&](int t, const JointPolicy& policy) {
            if (t == 0 || t == cfg.outer_iters || t % cfg.cadence == 0)
                snapshots.emplace_back(t, policy);
            if (cfg.checkpoint_every > 0 && t > 0 && t % cfg.checkpoint_every == 0)
                save_policy_file(outdir + "/checkpoint_rep" + std::to_string(rep_index) + "_t" +
                                     std::to_string(t) + ".policy",
                                 policy);
        };

        ProxResult prox_result = run_prox(env.spec, pi0, prox, hook);

        RngStream eval_rng = RngStream::root(rep_seed).substream("metrics");
        for (const auto& [t, policy] : snapshots) {
            RunRecord rec;
            rec.t = t;
            rec.seed = rep_seed;
            rec.config_hash = hash;
            if (cfg.potential_eval == ExperimentConfig::PotentialEval::kExact) {
                rec.potential = potential_value(env.spec, env.potential, policy);
                rec.constraint = exact_value_cost(env.spec, policy).at_initial;
                rec.potential_exact = true;
            } else {
                auto [phi, cost] = sampled_potential_and_cost(
                    env.spec, env.potential, policy, cfg.eval_batch,
                    eval_rng.substream(static_cast<uint64_t>(t)));
                rec.potential = phi;
                rec.constraint = cost;
                rec.potential_exact = false;
            }
            if (eval_env) {
                EquilibriumReport report = nash_gap(eval_env->spec, policy);
                rec.nash_gap = report.nash_gap;
            }
            if (t > 0) {
                const OuterRecord& h = prox_result.history[t - 1];
                rec.branch_cost_frac =
                    static_cast<double>(h.cost_branch_count) / cfg.inner_iters;
                if (cfg.record_wall) rec.wall_s = h.wall_seconds;
            }
            outcome.records.push_back(rec);
        }

        // Per-run min-max scaling of the potential trace.
        double lo = kInfinity, hi = -kInfinity;
        for (const RunRecord& r : outcome.records) {
            lo = std::min(lo, r.potential);
            hi = std::max(hi, r.potential);
        }
        for (RunRecord& r : outcome.records)
            r.potential_scaled = hi - lo > 1e-15 ? (r.potential - lo) / (hi - lo) : 0.0;
    } catch (const std::exception& e) {
        outcome.error = "repetition " + std::to_string(rep_index) + ": " + e.what();
    }
    return outcome;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentResult result;
    result.config_hash = config_hash(cfg);

    std::string outdir = cfg.outdir;
    if (const char* env_dir = std::getenv("CMPG_OUTDIR")) outdir = env_dir;
    std::filesystem::create_directories(outdir);
    result.outdir = outdir;

    EnvironmentBundle env = build_configured_environment(cfg);
    result.potential_label = "potential";
    if (env.id == "pollution_tax") {
        // The candidate per-stage table of this environment fails the
        // potential-identity check, so the reported trace is the per-step
        // social welfare sum_i r_i instead, labeled accordingly.
        env.potential_is_welfare = true;
        result.potential_label = "social_welfare";
        std::fill(env.potential.phi.begin(), env.potential.phi.end(), 0.0);
        for (const auto& table : env.spec.rewards)
            for (size_t i = 0; i < table.size(); ++i) env.potential.phi[i] += table[i];
    }

    int threads = 1;
    if (const char* env_threads = std::getenv("CMPG_THREADS"))
        threads = std::max(1, std::atoi(env_threads));
    threads = std::min(threads, cfg.reps);

    std::vector<RepOutcome> outcomes(cfg.reps);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int r = next.fetch_add(1);
            if (r >= cfg.reps) return;
            outcomes[r] = run_repetition(cfg, env, r, result.config_hash, outdir);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (int r = 0; r < cfg.reps; ++r) {
        if (!outcomes[r].error.empty()) {
            result.failures.push_back(outcomes[r].error);
            continue;
        }
        char name[64];
        std::snprintf(name, sizeof(name), "rep_%03d.csv", r);
        write_metrics(outcomes[r].records, outdir + "/" + name);
        result.repetitions.push_back(std::move(outcomes[r].records));
    }

    result.aggregate = aggregate_records(result.repetitions);
    write_aggregate(result.aggregate, outdir + "/aggregate.csv");

    std::ofstream info(outdir + "/run_info.txt");
    info << "config_hash " << result.config_hash << "\n";
    info << "potential_label " << result.potential_label << "\n";
    info << "failures " << result.failures.size() << "\n";
    if (cfg.eval_nash) {
        // The final iterate is the algorithm's output; the best recorded
        // iterate by equilibrium gap is reported alongside it.
        for (size_t r = 0; r < result.repetitions.size(); ++r) {
            const auto& rep = result.repetitions[r];
            int best_t = -1;
            double best_gap = kInfinity;
            for (const RunRecord& rec : rep)
                if (rec.nash_gap && *rec.nash_gap < best_gap) {
                    best_gap = *rec.nash_gap;
                    best_t = rec.t;
                }
            if (best_t >= 0 && rep.back().nash_gap)
                info << "rep " << r << " final_t " << rep.back().t << " final_nash_gap "
                     << format_number(*rep.back().nash_gap) << " best_t " << best_t
                     << " best_nash_gap " << format_number(best_gap) << "\n";
        }
    }
    info << "canonical_config_begin\n" << write_config(cfg) << "canonical_config_end\n";
    return result;
}

}  // namespace cmpg
