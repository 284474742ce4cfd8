#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nsa/rl/ddpg.hpp"
#include "nsa/rl/replay_buffer.hpp"
#include "nsa/rl/training.hpp"
#include "nsa/runtime/switching.hpp"

namespace nsa::runtime {

struct AdaptationConfig {
    bool retrain = true;
    /// Collect a shadow sample every step, or only while the BC holds the plant.
    bool collect_every_step = true;
    rl::NoiseSpec noise;
};

/// Shadow-mode sample collection and online retraining of the NC. Owns no data:
/// the buffer and agent belong to the experiment.
struct AdaptationModule {
    rl::ReplayBuffer* buffer = nullptr;
    rl::DdpgAgent* agent = nullptr;
    AdaptationConfig config;
    std::size_t updates = 0;
    std::size_t skipped_updates = 0;
};

/// Builds the retraining sample (s, a_nc, f(s, a_nc), r) by simulating one step
/// with the (possibly noisy) NC action. Unrecoverable actions get r_unrecov and a
/// terminal flag; reaching the goal is terminal too.
template <ControlSystem S>
rl::Transition am_collect(const S& sys, const typename S::State& s, const Vec& a_nc) {
    const auto hypothetical = sys.step(s, a_nc);
    const bool unrecoverable = !sys.recoverable(hypothetical);
    const double r = shaped_reward(unrecoverable, sys.unrecoverable_reward(),
                                   unrecoverable ? 0.0 : sys.performance_reward(s, a_nc, hypothetical));
    return {sys.features(s), a_nc, sys.features(hypothetical), r, unrecoverable || sys.goal_reached(hypothetical)};
}

/// theta_t = RL(theta_{t-1}, batch) while the BC holds the plant. Returns false
/// when the buffer is not yet large enough for a batch (update skipped).
inline bool am_retrain_step(AdaptationModule& am, Rng& rng) {
    if (!am.config.retrain || am.agent == nullptr || am.buffer == nullptr) return false;
    const std::size_t k = am.agent->config().batch_size;
    auto batch = am.buffer->ready(k) ? am.buffer->sample_batch(k, rng) : std::nullopt;
    if (!batch) {
        ++am.skipped_updates;
        return false;
    }
    am.agent->update(*batch);
    ++am.updates;
    return true;
}

struct SwitchEvent {
    std::size_t step = 0;
    Holder to = Holder::bc;  // bc: forward switch NC->BC, nc: reverse switch BC->NC
};

/// Per-trajectory log. Entry t holds the state s_t, the applied action a_t, the
/// controller that produced it and r(s_t, a_t, s_{t+1}); `states` has one extra
/// entry for the final state.
struct RunRecord {
    std::vector<Vec> states;
    std::vector<Vec> actions;
    std::vector<Vec> nc_actions;
    std::vector<Holder> holders;
    std::vector<double> rewards;
    std::vector<SwitchEvent> switches;
    std::size_t updates = 0;
    std::size_t bc_steps = 0;
    bool reached_goal = false;
    double total_return = 0.0;

    std::size_t length() const { return actions.size(); }
    std::size_t forward_switches() const {
        std::size_t n = 0;
        for (const auto& e : switches) n += e.to == Holder::bc ? 1 : 0;
        return n;
    }
};

struct NsaConfig {
    std::size_t max_trajectory_len = 500;
};

/// One NSA trajectory: DM switching, BC fallback, shadow-mode collection and
/// retraining on BC-held steps. Visiting an unsafe state throws SafetyViolation.
template <ControlSystem S>
RunRecord run_nsa_trajectory(const S& sys, typename S::State s, controllers::NeuralController& nc,
                             typename S::Baseline& bc, AdaptationModule* am, const NsaConfig& cfg, Rng& rng) {
    if (sys.unsafe(s)) throw SafetyViolation(std::string(sys.name()) + ": initial state is unsafe");
    if (!sys.recoverable(s)) throw InvalidInput(std::string(sys.name()) + ": initial state is not recoverable");
    RunRecord rec;
    DmState dm;
    const auto box = sys.action_box();
    rec.states.push_back(sys.state_vector(s));
    for (std::size_t t = 0; t < cfg.max_trajectory_len; ++t) {
        const Vec a_nc = nc_action(nc, sys, s);
        const DmState next_dm = dm_transition(dm, sys, s, a_nc, nc, static_cast<long>(t));
        if (next_dm.holder != dm.holder) {
            rec.switches.push_back({t, next_dm.holder});
            if (next_dm.holder == Holder::bc) bc.reset();
        }
        dm = next_dm;

        const Vec applied = dm.holder == Holder::bc ? bc.act(sys, s, rng) : a_nc;

        if (am != nullptr && am->buffer != nullptr && (am->config.collect_every_step || dm.holder == Holder::bc)) {
            const Vec shadow = am->config.noise.perturb(a_nc, box, rng);
            am->buffer->push(am_collect(sys, s, shadow));
        }
        if (dm.holder == Holder::bc) {
            ++rec.bc_steps;
            if (am != nullptr && am_retrain_step(*am, rng)) ++rec.updates;
        }

        const auto next = sys.step(s, applied);
        if (sys.unsafe(next)) {
            throw SafetyViolation(std::string(sys.name()) + ": unsafe state reached at step " + std::to_string(t + 1) +
                                  " under " + std::string(to_string(dm.holder)));
        }
        const double r = sys.performance_reward(s, applied, next);
        rec.actions.push_back(applied);
        rec.nc_actions.push_back(a_nc);
        rec.holders.push_back(dm.holder);
        rec.rewards.push_back(r);
        rec.total_return += r;
        rec.states.push_back(sys.state_vector(next));
        s = next;
        if (sys.goal_reached(s)) {
            rec.reached_goal = true;
            break;
        }
    }
    return rec;
}

}  // namespace nsa::runtime
