#include "cmpg/types.hpp"

#include <cmath>
#include <sstream>

namespace cmpg {

namespace {

constexpr double kStochTol = 1e-12;

std::string sa_label(int s, int a) {
    std::ostringstream os;
    os << "(s=" << s << ", a=" << a << ")";
    return os.str();
}

}  // namespace

double policy_distance(const JointPolicy& a, const JointPolicy& b) {
    double sq = 0.0;
    for (size_t i = 0; i < a.agents.size(); ++i) {
        const auto& x = a.agents[i].v;
        const auto& y = b.agents[i].v;
        for (size_t j = 0; j < x.size(); ++j) {
            double d = x[j] - y[j];
            sq += d * d;
        }
    }
    return std::sqrt(sq);
}

JointPolicy uniform_policy(const GameSpec& spec, double xi) {
    JointPolicy pi;
    pi.xi = xi;
    pi.agents.reserve(spec.num_agents);
    for (int i = 0; i < spec.num_agents; ++i) {
        int a = spec.action_counts[i];
        pi.agents.emplace_back(spec.num_states, a, 1.0 / a);
    }
    return pi;
}

JointPolicy greedy_policy(const GameSpec& spec, int action, double eps) {
    JointPolicy pi;
    pi.agents.reserve(spec.num_agents);
    for (int i = 0; i < spec.num_agents; ++i) {
        int a = spec.action_counts[i];
        int star = std::min(action, a - 1);
        Table t(spec.num_states, a, a > 1 ? eps / (a - 1) : 0.0);
        for (int s = 0; s < spec.num_states; ++s) t.at(s, star) = a > 1 ? 1.0 - eps : 1.0;
        pi.agents.push_back(std::move(t));
    }
    return pi;
}

std::vector<std::string> validate_spec(const GameSpec& spec) {
    std::vector<std::string> problems;
    auto fail = [&problems](const std::string& msg) { problems.push_back(msg); };

    if (spec.num_states <= 0) fail("num_states must be positive");
    if (spec.num_agents <= 0) fail("num_agents must be positive");
    if (static_cast<int>(spec.action_counts.size()) != spec.num_agents)
        fail("action_counts size does not match num_agents");
    for (size_t i = 0; i < spec.action_counts.size(); ++i)
        if (spec.action_counts[i] <= 0) fail("action count of agent " + std::to_string(i) + " must be positive");
    if (!problems.empty()) return problems;  // shapes below would be nonsense

    const long long A = spec.joint_actions();
    const long long S = spec.num_states;
    const size_t sa = static_cast<size_t>(S * A);

    if (spec.rewards.size() != static_cast<size_t>(spec.num_agents))
        fail("rewards must hold one table per agent");
    for (size_t i = 0; i < spec.rewards.size(); ++i)
        if (spec.rewards[i].size() != sa)
            fail("reward table of agent " + std::to_string(i) + " has wrong size");
    if (spec.cost.size() != sa) fail("cost table has wrong size");
    if (spec.stop_probs.size() != sa) fail("stop_probs table has wrong size");
    if (spec.transitions.size() != sa * S) fail("transition table has wrong size");
    if (spec.initial_dist.size() != static_cast<size_t>(S)) fail("initial_dist has wrong size");
    if (!problems.empty()) return problems;

    for (const auto& table : spec.rewards)
        for (double r : table)
            if (!std::isfinite(r)) { fail("non-finite reward entry"); break; }
    for (double c : spec.cost)
        if (!std::isfinite(c)) { fail("non-finite cost entry"); break; }

    double mu_sum = 0.0;
    for (double m : spec.initial_dist) {
        if (m < -kStochTol) { fail("initial_dist has a negative entry"); break; }
        mu_sum += m;
    }
    if (std::abs(mu_sum - 1.0) > kStochTol) fail("initial_dist does not sum to 1");

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            size_t idx = static_cast<size_t>(s) * A + a;
            double kappa = spec.stop_probs[idx];
            if (kappa <= 0.0 || kappa > 1.0)
                fail("stop probability out of (0,1] at " + sa_label(s, a));
            double mass = kappa;
            for (int t = 0; t < S; ++t) {
                double p = spec.transitions[idx * S + t];
                if (p < -kStochTol) { fail("negative transition probability at " + sa_label(s, a)); break; }
                mass += p;
            }
            if (std::abs(mass - 1.0) > kStochTol)
                fail("continuation mass plus stop probability != 1 at " + sa_label(s, a));
            if (spec.horizon == HorizonMode::kFixedHorizon && spec.episode_len > 1 && kappa >= 1.0)
                fail("fixed-horizon stepping undefined with stop probability 1 at " + sa_label(s, a));
        }
    }

    if (spec.horizon == HorizonMode::kFixedHorizon && spec.episode_len < 1)
        fail("fixed-horizon mode requires episode_len >= 1");

    return problems;
}

std::vector<std::string> validate_policy(const GameSpec& spec, const JointPolicy& policy) {
    std::vector<std::string> problems;
    if (policy.num_agents() != spec.num_agents) {
        problems.push_back("policy agent count does not match spec");
        return problems;
    }
    if (policy.xi < 0.0 || policy.xi > 1.0) problems.push_back("policy floor xi out of [0,1]");
    for (int i = 0; i < spec.num_agents; ++i) {
        const Table& t = policy.agents[i];
        if (t.rows != spec.num_states || t.cols != spec.action_counts[i]) {
            problems.push_back("policy table of agent " + std::to_string(i) + " has wrong shape");
            continue;
        }
        double floor = policy.xi > 0.0 ? policy.xi / t.cols : 0.0;
        for (int s = 0; s < t.rows; ++s) {
            double sum = 0.0;
            bool bad_floor = false;
            for (int a = 0; a < t.cols; ++a) {
                double p = t.at(s, a);
                sum += p;
                if (p < floor - kStochTol || p < -kStochTol) bad_floor = true;
            }
            if (std::abs(sum - 1.0) > kStochTol)
                problems.push_back("policy row of agent " + std::to_string(i) + " at state " +
                                   std::to_string(s) + " does not sum to 1");
            if (bad_floor)
                problems.push_back("policy row of agent " + std::to_string(i) + " at state " +
                                   std::to_string(s) + " violates the xi floor");
        }
    }
    return problems;
}

GameSpec normalized_to_minimize(const GameSpec& spec) {
    if (spec.objective == Objective::kMinimize) return spec;
    GameSpec out = spec;
    for (auto& table : out.rewards)
        for (double& r : table) r = -r;
    out.objective = Objective::kMinimize;
    return out;
}

}  // namespace cmpg
