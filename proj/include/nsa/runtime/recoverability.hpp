#pragma once

#include "nsa/controllers/baseline.hpp"
#include "nsa/plants/inverted_pendulum.hpp"
#include "nsa/plants/pancreas.hpp"
#include "nsa/plants/rover.hpp"

namespace nsa::runtime {

/// Inside the BC's invariant ellipsoid x^T P x <= 1.
inline bool ip_recoverable(const plants::IpState& s, const controllers::IpBcParams& bc) {
    return bc.lyapunov(s) <= 1.0;
}

/// l_min >= d_safe + v^2 / (2 a_max) + epsilon, compared with a 1e-12 slack so that
/// a reading exactly on the threshold (0.41 at full speed) is not lost to rounding.
inline bool rover_recoverable(const plants::RoverState& s, const plants::RoverParams& p) {
    return s.min_reading() >= p.d_safe + p.braking_distance(s.v) + p.epsilon - 1e-12;
}

struct ApRecoverabilityConfig {
    int max_steps = 5000;
};

/// Simulates the pump-off fallback from `s` until G has provably bottomed out
/// (dG/dt >= 0 while dI/dt <= 0; with u = 0 both signs then persist). Any visited
/// G below the hypoglycemia threshold makes `s` unrecoverable. Hitting the step cap
/// is answered conservatively with false.
inline bool ap_recoverable(const plants::ApState& s, const plants::ApParams& p,
                           const ApRecoverabilityConfig& cfg = {}) {
    plants::ApState cur = s;
    for (int k = 0; k <= cfg.max_steps; ++k) {
        if (cur.G < p.hypo_threshold) return false;
        const Eigen::Vector3d d = plants::ap_derivative(cur.vec(), 0.0, p);
        if (d(0) >= 0.0 && d(1) <= 0.0) return true;
        cur = plants::ap_step(cur, 0.0, p);
    }
    return false;
}

}  // namespace nsa::runtime
