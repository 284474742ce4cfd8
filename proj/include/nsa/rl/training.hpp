#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <string_view>

#include "nsa/rl/ddpg.hpp"
#include "nsa/rl/replay_buffer.hpp"
#include "nsa/runtime/switching.hpp"

namespace nsa::rl {

/// Exploration noise nu_t added to NC actions; sigma is per action dimension in
/// plant units.
struct NoiseSpec {
    enum class Kind { gaussian, none };
    Kind kind = Kind::none;
    Vec sigma;

    static NoiseSpec none() { return {}; }
    static NoiseSpec gaussian(Vec sigma) {
        if (!sigma.allFinite() || (sigma.array() < 0.0).any()) throw InvalidInput("noise sigma must be finite and >= 0");
        return {Kind::gaussian, std::move(sigma)};
    }

    Vec perturb(const Vec& a, const controllers::ActionBox& box, Rng& rng) const {
        if (kind == Kind::none) return a;
        if (sigma.size() != a.size()) throw InvalidInput("noise sigma does not match action dimension");
        std::normal_distribution<double> n01(0.0, 1.0);
        Vec out = a;
        for (Eigen::Index i = 0; i < a.size(); ++i) out(i) += sigma(i) * n01(rng);
        return box.clamp(out);
    }
};

/// How an unrecoverable NC action is handled while training.
enum class SrlStrategy {
    pua,        // store it with r_unrecov as a terminal sample, never apply it, end the episode
    bc_filter,  // apply and store the BC's action instead
    rnd_filter  // apply and store a random recoverable action instead
};

inline std::string_view to_string(SrlStrategy s) {
    switch (s) {
        case SrlStrategy::pua: return "PUA";
        case SrlStrategy::bc_filter: return "BC_FILTER";
        case SrlStrategy::rnd_filter: return "RND_FILTER";
    }
    return "PUA";
}

inline SrlStrategy srl_strategy_from_string(std::string_view s) {
    if (s == "PUA" || s == "pua") return SrlStrategy::pua;
    if (s == "BC_FILTER" || s == "bc_filter" || s == "BC") return SrlStrategy::bc_filter;
    if (s == "RND_FILTER" || s == "rnd_filter" || s == "RND") return SrlStrategy::rnd_filter;
    throw ConfigError("unknown srl strategy '" + std::string(s) + "'");
}

struct TrainingConfig {
    DdpgConfig ddpg;
    std::size_t max_steps = 200000;
    std::size_t max_trajectory_len = 500;
    std::size_t warmup = 1000;  // updates start once the buffer holds this many samples
    std::size_t buffer_capacity = 1000000;
    NoiseSpec noise;
    SrlStrategy strategy = SrlStrategy::pua;
    double r_unrecov = 0.0;
    int rnd_max_samples = 10000;
};

struct EpisodeStats {
    std::size_t length = 0;
    double total_return = 0.0;
    std::size_t fsc_events = 0;   // unrecoverable NC actions proposed
    bool unrecoverable = false;   // ended by an unrecoverable action (PUA)
    bool reached_goal = false;
    bool aborted = false;         // RND_FILTER found no recoverable action
    std::size_t updates = 0;
    std::size_t stored = 0;
    std::string error;
};

/// Observer for every transition stored during training (episode logs).
using TransitionSink = std::function<void(const Transition&)>;

namespace detail {

inline void maybe_update(DdpgAgent& agent, const ReplayBuffer& buf, const TrainingConfig& cfg, Rng& rng,
                         EpisodeStats& stats) {
    if (buf.size() < cfg.warmup || !buf.ready(cfg.ddpg.batch_size)) return;
    auto batch = buf.sample_batch(cfg.ddpg.batch_size, rng);
    if (!batch) return;
    agent.update(*batch);
    ++stats.updates;
}

}  // namespace detail

/// Runs one episode from a random recoverable initial state, storing transitions
/// and performing one DDPG update per step once the buffer is warm. `step_budget`
/// truncates the episode early (used to hit an exact total step count).
template <runtime::ControlSystem S>
EpisodeStats run_training_episode(const S& sys, DdpgAgent& agent, typename S::Baseline& bc,
                                  const TrainingConfig& cfg, ReplayBuffer& buf, Rng& rng,
                                  std::size_t step_budget = static_cast<std::size_t>(-1),
                                  const TransitionSink& sink = {}) {
    EpisodeStats stats;
    typename S::State s = sys.sample_initial_state(rng);
    bc.reset();
    const auto box = sys.action_box();
    const std::size_t limit = std::min(cfg.max_trajectory_len, step_budget);

    auto store = [&](Transition t) {
        if (sink) sink(t);
        buf.push(t);
        ++stats.stored;
    };

    while (stats.length < limit) {
        Vec features = sys.features(s);
        const Vec a_nc = cfg.noise.perturb(agent.policy().act(features), box, rng);
        Vec applied = a_nc;
        if (runtime::fsc(sys, s, a_nc)) {
            ++stats.fsc_events;
            if (cfg.strategy == SrlStrategy::pua) {
                const auto hypothetical = sys.step(s, a_nc);
                store({features, a_nc, sys.features(hypothetical), cfg.r_unrecov, true});
                stats.total_return += cfg.r_unrecov;
                ++stats.length;
                stats.unrecoverable = true;
                detail::maybe_update(agent, buf, cfg, rng, stats);
                break;  // the BC takes over and safely ends the episode; its actions are not stored
            }
            if (cfg.strategy == SrlStrategy::bc_filter) {
                applied = bc.act(sys, s, rng);
            } else {
                std::uniform_real_distribution<double> u01(0.0, 1.0);
                bool found = false;
                for (int k = 0; k < cfg.rnd_max_samples && !found; ++k) {
                    Vec candidate(static_cast<Eigen::Index>(box.dim()));
                    for (Eigen::Index i = 0; i < candidate.size(); ++i) {
                        candidate(i) = box.low(i) + (box.high(i) - box.low(i)) * u01(rng);
                    }
                    if (!runtime::fsc(sys, s, candidate)) {
                        applied = candidate;
                        found = true;
                    }
                }
                if (!found) {
                    stats.aborted = true;
                    stats.error = "no recoverable action found after " + std::to_string(cfg.rnd_max_samples) +
                                  " random samples";
                    break;
                }
            }
        }
        const auto next = sys.step(s, applied);
        const double r = sys.performance_reward(s, applied, next);
        const bool goal = sys.goal_reached(next);
        store({features, applied, sys.features(next), r, goal});
        stats.total_return += r;
        ++stats.length;
        detail::maybe_update(agent, buf, cfg, rng, stats);
        s = next;
        if (goal) {
            stats.reached_goal = true;
            break;
        }
    }
    return stats;
}

struct CurveRow {
    std::size_t step = 0;
    double mean_episode_return = 0.0;
    double unrecoverable_fraction = 0.0;
    std::size_t episodes = 0;
};

/// Trains for exactly `cfg.max_steps` environment steps. `on_row` receives one
/// row per `curve_interval` steps summarizing the episodes finished in that window.
template <runtime::ControlSystem S>
std::vector<CurveRow> train(const S& sys, DdpgAgent& agent, const TrainingConfig& cfg, ReplayBuffer& buf, Rng& rng,
                            std::size_t curve_interval = 1000, const TransitionSink& sink = {},
                            const std::function<void(const EpisodeStats&)>& on_episode = {}) {
    std::vector<CurveRow> curve;
    auto bc = sys.make_baseline();
    std::size_t steps = 0;
    double window_return = 0.0;
    std::size_t window_episodes = 0;
    std::size_t window_unrec = 0;
    std::size_t next_row = curve_interval;
    while (steps < cfg.max_steps) {
        const EpisodeStats ep = run_training_episode(sys, agent, bc, cfg, buf, rng, cfg.max_steps - steps, sink);
        if (on_episode) on_episode(ep);
        steps += std::max<std::size_t>(ep.length, 1);
        window_return += ep.total_return;
        ++window_episodes;
        window_unrec += ep.unrecoverable ? 1 : 0;
        while (curve_interval > 0 && steps >= next_row) {
            CurveRow row;
            row.step = next_row;
            row.episodes = window_episodes;
            if (window_episodes > 0) {
                row.mean_episode_return = window_return / static_cast<double>(window_episodes);
                row.unrecoverable_fraction = static_cast<double>(window_unrec) / static_cast<double>(window_episodes);
            }
            curve.push_back(row);
            window_return = 0.0;
            window_episodes = 0;
            window_unrec = 0;
            next_row += curve_interval;
        }
    }
    return curve;
}

}  // namespace nsa::rl
