#include "cmpg/spec_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace cmpg {

namespace {

/// Token reader that strips '#' comments.
class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string next(const char* context) {
        std::string tok;
        while (in_ >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in_, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error(std::string("unexpected end of input while reading ") + context);
    }

    double number(const char* context) {
        std::string tok = next(context);
        if (tok == "inf" || tok == "+inf") return kInfinity;
        if (tok == "-inf") return -kInfinity;
        try {
            size_t pos = 0;
            double v = std::stod(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error("expected a number for " + std::string(context) +
                                     ", got '" + tok + "'");
        }
    }

    long long integer(const char* context) {
        double v = number(context);
        long long n = static_cast<long long>(v);
        if (static_cast<double>(n) != v)
            throw std::runtime_error("expected an integer for " + std::string(context));
        return n;
    }

    void expect(const std::string& word) {
        std::string tok = next(word.c_str());
        if (tok != word)
            throw std::runtime_error("expected '" + word + "', got '" + tok + "'");
    }

private:
    std::istream& in_;
};

void read_values(TokenReader& r, std::vector<double>& out, size_t n, const char* context) {
    out.resize(n);
    for (size_t i = 0; i < n; ++i) out[i] = r.number(context);
}

void write_values(std::ostream& out, const std::vector<double>& v, size_t per_line) {
    for (size_t i = 0; i < v.size(); ++i) {
        out << v[i];
        out << (((i + 1) % per_line == 0 || i + 1 == v.size()) ? '\n' : ' ');
    }
}

}  // namespace

GameSpec load_game(std::istream& in) {
    TokenReader r(in);
    r.expect("cmpg-game-v1");
    GameSpec spec;
    r.expect("states");
    spec.num_states = static_cast<int>(r.integer("states"));
    r.expect("agents");
    spec.num_agents = static_cast<int>(r.integer("agents"));
    if (spec.num_states <= 0 || spec.num_agents <= 0)
        throw std::runtime_error("states and agents must be positive");
    r.expect("actions");
    spec.action_counts.resize(spec.num_agents);
    for (int i = 0; i < spec.num_agents; ++i) {
        spec.action_counts[i] = static_cast<int>(r.integer("actions"));
        if (spec.action_counts[i] <= 0) throw std::runtime_error("action counts must be positive");
    }
    r.expect("objective");
    std::string obj = r.next("objective");
    if (obj == "minimize")
        spec.objective = Objective::kMinimize;
    else if (obj == "maximize")
        spec.objective = Objective::kMaximize;
    else
        throw std::runtime_error("objective must be minimize or maximize, got '" + obj + "'");
    r.expect("horizon");
    std::string hz = r.next("horizon");
    if (hz == "random") {
        spec.horizon = HorizonMode::kRandomStopping;
    } else if (hz == "fixed") {
        spec.horizon = HorizonMode::kFixedHorizon;
        spec.episode_len = static_cast<int>(r.integer("episode length"));
    } else {
        throw std::runtime_error("horizon must be random or fixed, got '" + hz + "'");
    }
    r.expect("threshold");
    spec.threshold = r.number("threshold");

    const size_t S = spec.num_states;
    const size_t A = static_cast<size_t>(spec.joint_actions());
    r.expect("initial_dist");
    read_values(r, spec.initial_dist, S, "initial_dist");

    spec.rewards.resize(spec.num_agents);
    for (int i = 0; i < spec.num_agents; ++i) {
        r.expect("rewards");
        long long agent = r.integer("reward agent index");
        if (agent != i) throw std::runtime_error("reward blocks must appear in agent order");
        read_values(r, spec.rewards[i], S * A, "rewards");
    }
    r.expect("cost");
    read_values(r, spec.cost, S * A, "cost");
    r.expect("stop");
    read_values(r, spec.stop_probs, S * A, "stop");
    r.expect("transitions");
    read_values(r, spec.transitions, S * A * S, "transitions");
    r.expect("end");

    auto problems = validate_spec(spec);
    if (!problems.empty()) {
        std::string msg = "loaded game spec is invalid:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw std::runtime_error(msg);
    }
    return spec;
}

void save_game(std::ostream& out, const GameSpec& spec) {
    out << std::setprecision(17);
    out << "cmpg-game-v1\n";
    out << "states " << spec.num_states << "\n";
    out << "agents " << spec.num_agents << "\n";
    out << "actions";
    for (int a : spec.action_counts) out << ' ' << a;
    out << "\n";
    out << "objective " << (spec.objective == Objective::kMaximize ? "maximize" : "minimize") << "\n";
    if (spec.horizon == HorizonMode::kRandomStopping)
        out << "horizon random\n";
    else
        out << "horizon fixed " << spec.episode_len << "\n";
    if (spec.threshold == kInfinity)
        out << "threshold inf\n";
    else
        out << "threshold " << spec.threshold << "\n";
    const size_t A = static_cast<size_t>(spec.joint_actions());
    out << "initial_dist\n";
    write_values(out, spec.initial_dist, spec.initial_dist.size());
    for (int i = 0; i < spec.num_agents; ++i) {
        out << "rewards " << i << "\n";
        write_values(out, spec.rewards[i], A);
    }
    out << "cost\n";
    write_values(out, spec.cost, A);
    out << "stop\n";
    write_values(out, spec.stop_probs, A);
    out << "transitions\n";
    write_values(out, spec.transitions, spec.num_states);
    out << "end\n";
}

JointPolicy load_policy(std::istream& in) {
    TokenReader r(in);
    r.expect("cmpg-policy-v1");
    r.expect("agents");
    int m = static_cast<int>(r.integer("agents"));
    r.expect("states");
    int s = static_cast<int>(r.integer("states"));
    if (m <= 0 || s <= 0) throw std::runtime_error("agents and states must be positive");
    r.expect("actions");
    std::vector<int> counts(m);
    for (int i = 0; i < m; ++i) counts[i] = static_cast<int>(r.integer("actions"));
    r.expect("xi");
    JointPolicy pi;
    pi.xi = r.number("xi");
    pi.agents.reserve(m);
    for (int i = 0; i < m; ++i) {
        r.expect("agent");
        long long idx = r.integer("agent index");
        if (idx != i) throw std::runtime_error("agent blocks must appear in order");
        Table t(s, counts[i]);
        for (double& x : t.v) x = r.number("policy entry");
        pi.agents.push_back(std::move(t));
    }
    r.expect("end");
    return pi;
}

void save_policy(std::ostream& out, const JointPolicy& policy) {
    out << std::setprecision(17);
    out << "cmpg-policy-v1\n";
    out << "agents " << policy.num_agents() << "\n";
    out << "states " << (policy.agents.empty() ? 0 : policy.agents[0].rows) << "\n";
    out << "actions";
    for (const auto& t : policy.agents) out << ' ' << t.cols;
    out << "\n";
    out << "xi " << policy.xi << "\n";
    for (int i = 0; i < policy.num_agents(); ++i) {
        out << "agent " << i << "\n";
        write_values(out, policy.agents[i].v, policy.agents[i].cols);
    }
    out << "end\n";
}

GameSpec load_game_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open game spec file: " + path);
    return load_game(in);
}

void save_game_file(const std::string& path, const GameSpec& spec) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write game spec file: " + path);
    save_game(out, spec);
}

JointPolicy load_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open policy file: " + path);
    return load_policy(in);
}

void save_policy_file(const std::string& path, const JointPolicy& policy) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write policy file: " + path);
    save_policy(out, policy);
}

}  // namespace cmpg
