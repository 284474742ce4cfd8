#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

#include "nsa/controllers/neural.hpp"
#include "nsa/runtime/switching.hpp"

namespace nsa::rl {

/// Outcome counts and averages over a set of evaluation trajectories. For plants
/// with a goal, `complete` counts timeouts.
struct EvalReport {
    std::size_t n_trajs = 0;
    std::size_t unrecoverable = 0;
    std::size_t complete = 0;
    std::size_t targets = 0;
    double avg_return = 0.0;
    double avg_discounted_return = 0.0;
    double avg_length = 0.0;
};

struct TrajectoryOutcome {
    enum class Kind { unrecoverable, complete, target };
    Kind kind = Kind::complete;
    std::size_t length = 0;
    double total_return = 0.0;
    double discounted_return = 0.0;
};

/// Runs the policy alone. The first unrecoverable action ends the trajectory (it
/// is not applied and earns r_unrecov).
template <runtime::ControlSystem S>
TrajectoryOutcome run_policy(const S& sys, const controllers::NeuralController& policy, typename S::State s,
                             double gamma, std::size_t max_len) {
    TrajectoryOutcome out;
    double discount = 1.0;
    for (std::size_t t = 0; t < max_len; ++t) {
        const Vec a = runtime::nc_action(policy, sys, s);
        const auto next = sys.step(s, a);
        if (!sys.recoverable(next)) {
            const double r = sys.unrecoverable_reward();
            out.total_return += r;
            out.discounted_return += discount * r;
            ++out.length;
            out.kind = TrajectoryOutcome::Kind::unrecoverable;
            return out;
        }
        const double r = sys.performance_reward(s, a, next);
        out.total_return += r;
        out.discounted_return += discount * r;
        discount *= gamma;
        ++out.length;
        s = next;
        if (sys.goal_reached(s)) {
            out.kind = TrajectoryOutcome::Kind::target;
            return out;
        }
    }
    out.kind = TrajectoryOutcome::Kind::complete;
    return out;
}

/// The shared evaluation set: a pure function of (system, seed).
template <runtime::ControlSystem S>
std::vector<typename S::State> initial_state_set(const S& sys, std::size_t n, std::uint64_t seed) {
    std::vector<typename S::State> states;
    states.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = substream(seed, "eval-initial-state", i);
        states.push_back(sys.sample_initial_state(rng));
    }
    return states;
}

inline EvalReport summarize(const std::vector<TrajectoryOutcome>& outcomes) {
    EvalReport r;
    r.n_trajs = outcomes.size();
    if (outcomes.empty()) return r;
    double ret = 0.0, disc = 0.0, len = 0.0;
    for (const auto& o : outcomes) {
        switch (o.kind) {
            case TrajectoryOutcome::Kind::unrecoverable: ++r.unrecoverable; break;
            case TrajectoryOutcome::Kind::complete: ++r.complete; break;
            case TrajectoryOutcome::Kind::target: ++r.targets; break;
        }
        ret += o.total_return;
        disc += o.discounted_return;
        len += static_cast<double>(o.length);
    }
    const double n = static_cast<double>(outcomes.size());
    r.avg_return = ret / n;
    r.avg_discounted_return = disc / n;
    r.avg_length = len / n;
    return r;
}

/// Evaluates on a fixed initial-state set. Trajectories are split across
/// `workers` threads, each with its own policy copy; results are merged in index
/// order so the report does not depend on the worker count.
template <runtime::ControlSystem S>
EvalReport evaluate_policy(const S& sys, const controllers::NeuralController& policy,
                           const std::vector<typename S::State>& initial_states, double gamma = 0.99,
                           std::size_t max_len = 500, unsigned workers = 1,
                           std::vector<TrajectoryOutcome>* outcomes_out = nullptr) {
    std::vector<TrajectoryOutcome> outcomes(initial_states.size());
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, initial_states.size()))));
    auto run_range = [&](std::size_t begin, std::size_t end) {
        const controllers::NeuralController local = policy;
        for (std::size_t i = begin; i < end; ++i) outcomes[i] = run_policy(sys, local, initial_states[i], gamma, max_len);
    };
    if (workers == 1) {
        run_range(0, initial_states.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (initial_states.size() + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(initial_states.size(), begin + chunk);
            if (begin < end) pool.emplace_back(run_range, begin, end);
        }
    }
    if (outcomes_out) *outcomes_out = outcomes;
    return summarize(outcomes);
}

/// Draws `n_trajs` initial states from `rng` and evaluates on them.
template <runtime::ControlSystem S>
EvalReport evaluate_policy(const S& sys, const controllers::NeuralController& policy, std::size_t n_trajs, Rng& rng,
                           double gamma = 0.99, std::size_t max_len = 500) {
    std::vector<typename S::State> states;
    states.reserve(n_trajs);
    for (std::size_t i = 0; i < n_trajs; ++i) states.push_back(sys.sample_initial_state(rng));
    return evaluate_policy(sys, policy, states, gamma, max_len);
}

}  // namespace nsa::rl
