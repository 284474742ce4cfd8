#pragma once

#include <algorithm>
#include <cmath>

#include "nsa/common.hpp"

namespace nsa::plants {

/// G: blood-glucose deviation from the 7.8 mmol/L reference (negative = low),
/// I: plasma insulin (mU/L), x: subcutaneous insulin mass (mU).
struct ApState {
    double G = 0.0;
    double I = 0.0;
    double x = 0.0;

    Eigen::Vector3d vec() const { return {G, I, x}; }
    static ApState from(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
    friend bool operator==(const ApState&, const ApState&) = default;
};

/// Patient parameters. These defaults are placeholders chosen so that the pump can
/// both regulate G to 0 (u ~ 20.8 mU/min) and overdose into hypoglycemia; they are
/// not clinical values.
struct ApParams {
    double p1 = 0.025;
    double p2 = 0.01;
    double p3 = 0.1925;
    double ke = 0.09;
    double ka = 0.025;
    double VI = 12.0;
    double dt = 1.0;      // min
    double u_max = 100.0; // mU/min
    int substeps = 4;     // RK4 substeps per dt
    double hypo_threshold = -3.8;

    bool valid() const {
        return p1 > 0 && p2 > 0 && p3 > 0 && ke > 0 && ka > 0 && VI > 0 && dt > 0 && u_max > 0 && substeps > 0;
    }
    /// G at rest with the pump off.
    double basal_glucose() const { return p3 / p1; }
};

inline Eigen::Vector3d ap_derivative(const Eigen::Vector3d& s, double u, const ApParams& p) {
    return {-p.p1 * s(0) - p.p2 * s(1) + p.p3,
            -p.ke * s(1) + (p.ka / p.VI) * s(2),
            -p.ka * s(2) + u};
}

/// One dt of the glucose-insulin ODE (classical RK4 with `substeps` substeps).
inline ApState ap_step(const ApState& s, double u, const ApParams& p) {
    const double input = std::clamp(u, 0.0, p.u_max);
    const double h = p.dt / p.substeps;
    Eigen::Vector3d y = s.vec();
    for (int k = 0; k < p.substeps; ++k) {
        const Eigen::Vector3d k1 = ap_derivative(y, input, p);
        const Eigen::Vector3d k2 = ap_derivative(y + 0.5 * h * k1, input, p);
        const Eigen::Vector3d k3 = ap_derivative(y + 0.5 * h * k2, input, p);
        const Eigen::Vector3d k4 = ap_derivative(y + h * k3, input, p);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return ApState::from(y);
}

}  // namespace nsa::plants
