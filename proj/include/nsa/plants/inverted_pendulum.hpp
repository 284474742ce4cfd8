#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nsa/common.hpp"

namespace nsa::plants {

/// Cart-pole state: cart position p (m), cart velocity v (m/s), pendulum angle
/// theta (rad), angular velocity omega (rad/s).
struct IpState {
    double p = 0.0;
    double v = 0.0;
    double theta = 0.0;
    double omega = 0.0;

    Eigen::Vector4d vec() const { return {p, v, theta, omega}; }
    static IpState from(const Eigen::Vector4d& x) { return {x(0), x(1), x(2), x(3)}; }
    bool finite() const { return std::isfinite(p) && std::isfinite(v) && std::isfinite(theta) && std::isfinite(omega); }
    friend bool operator==(const IpState&, const IpState&) = default;
};

/// Linearized cart-pole around the upright equilibrium, x' = A x + B Va.
struct IpParams {
    Eigen::Matrix4d A = (Eigen::Matrix4d() << 0, 1, 0, 0,
                                              0, -10.95, -2.75, 0.0043,
                                              0, 0, 0, 1,
                                              0, 24.92, 28.58, -0.044).finished();
    Eigen::Vector4d B{0.0, 1.94, 0.0, -4.44};
    double dt = 0.01;
    double p_max = 1.0;
    double v_max = 1.0;
    double theta_max = 15.0 * std::numbers::pi / 180.0;
    double va_max = 4.95;

    bool in_safety_box(const IpState& s) const {
        return std::abs(s.p) <= p_max && std::abs(s.v) <= v_max && std::abs(s.theta) <= theta_max;
    }
};

inline Eigen::Vector4d ip_derivative(const IpState& s, double va, const IpParams& params) {
    return params.A * s.vec() + params.B * va;
}

/// One forward-Euler step with the input clamped into the action box.
inline IpState ip_step(const IpState& s, double va, const IpParams& params) {
    const double u = std::clamp(va, -params.va_max, params.va_max);
    return IpState::from(s.vec() + params.dt * ip_derivative(s, u, params));
}

}  // namespace nsa::plants
