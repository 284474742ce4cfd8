#pragma once

#include <cmath>

#include "nsa/plants/inverted_pendulum.hpp"
#include "nsa/plants/pancreas.hpp"
#include "nsa/plants/rover.hpp"

namespace nsa::runtime {

/// r(s, a, s') = r_unrecov if FSC(s, a), r_perf(s, a, s') otherwise.
inline double shaped_reward(bool fsc, double r_unrecov, double r_perf) { return fsc ? r_unrecov : r_perf; }

/// Keep the pendulum upright and the cart still.
inline double ip_performance_reward(const plants::IpState& next) {
    return 10.0 - 10.0 * next.v * next.v - (1.0 - std::cos(next.theta));
}

inline constexpr double kRoverTargetReward = 10000.0;
inline constexpr double kRoverUnrecoverableReward = -20000.0;

inline double rover_performance_reward(const plants::RoverState& next, const plants::RoverParams& p) {
    const double dt = plants::distance_to_target(next, p);
    if (dt <= p.reach_distance) return kRoverTargetReward;
    return -1.0 - 20.0 * dt;
}

/// Asymmetric glucose reward; continuous at G' in {-3.8, -1, 1, 3.2}.
inline double ap_performance_reward(double g) {
    const double a = std::abs(g);
    if (a <= 1.0) return 10.0 - a;
    if (g > 1.0 && g <= 3.2) return 14.0 - 5.0 * a;
    if (g > 3.2) return 26.8 - 9.0 * a;
    if (g >= -3.8) return 16.0 - 7.0 * a;
    return 65.4 - 20.0 * a;
}

/// Strong-hypoglycemia branch evaluated at the hypoglycemia boundary.
inline double ap_unrecoverable_reward(double hypo_threshold = -3.8) { return ap_performance_reward(hypo_threshold); }

}  // namespace nsa::runtime
