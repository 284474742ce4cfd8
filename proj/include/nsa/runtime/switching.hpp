#pragma once

#include <cstddef>
#include <string_view>

#include "nsa/controllers/neural.hpp"
#include "nsa/runtime/systems.hpp"

namespace nsa::runtime {

/// Forward switching condition: the one-step successor f(s, a) leaves R_BC.
template <ControlSystem S>
bool fsc(const S& sys, const typename S::State& s, const Vec& a) {
    return !sys.recoverable(sys.step(s, a));
}

template <ControlSystem S>
Vec nc_action(const controllers::NeuralController& nc, const S& sys, const typename S::State& s) {
    return nc.act(sys.features(s));
}

/// Reverse switching condition. Horizon mode: the NC, simulated from s for T steps,
/// never triggers the FSC (steps 0..T inclusive). Margin mode: the system's
/// clearance rule.
template <ControlSystem S>
bool rsc(const S& sys, const typename S::State& s, const controllers::NeuralController& nc) {
    const RscConfig cfg = sys.rsc_config();
    if (cfg.mode == RscConfig::Mode::margin) {
        if constexpr (requires { sys.margin_rsc(s); }) {
            return sys.margin_rsc(s);
        } else {
            throw InvalidInput(std::string(sys.name()) + " has no margin reverse-switching rule");
        }
    }
    typename S::State cur = s;
    for (int t = 0; t <= cfg.horizon; ++t) {
        const Vec a = nc_action(nc, sys, cur);
        if (fsc(sys, cur, a)) return false;
        if (t < cfg.horizon) cur = sys.step(cur, a);
    }
    return true;
}

enum class Holder { nc, bc };

inline std::string_view to_string(Holder h) { return h == Holder::nc ? "NC" : "BC"; }

/// Which controller drives the plant, plus switch bookkeeping.
struct DmState {
    Holder holder = Holder::nc;
    std::size_t forward_switches = 0;
    std::size_t reverse_switches = 0;
    long last_switch_step = -1;
};

/// DM_t = BC if DM_{t-1} = NC and FSC(s_t, a_nc); NC if DM_{t-1} = BC and RSC(s_t);
/// otherwise unchanged.
template <ControlSystem S>
DmState dm_transition(const DmState& dm, const S& sys, const typename S::State& s, const Vec& a_nc,
                      const controllers::NeuralController& nc, long step = -1) {
    DmState next = dm;
    if (dm.holder == Holder::nc) {
        if (fsc(sys, s, a_nc)) {
            next.holder = Holder::bc;
            ++next.forward_switches;
            next.last_switch_step = step;
        }
    } else if (rsc(sys, s, nc)) {
        next.holder = Holder::nc;
        ++next.reverse_switches;
        next.last_switch_step = step;
    }
    return next;
}

}  // namespace nsa::runtime
