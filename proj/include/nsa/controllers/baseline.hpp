#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nsa/common.hpp"
#include "nsa/plants/inverted_pendulum.hpp"
#include "nsa/plants/pancreas.hpp"
#include "nsa/plants/rover.hpp"

namespace nsa::controllers {

/// LMI-derived state feedback Va = K x and the ellipsoid x^T P x <= 1 it keeps invariant.
struct IpBcParams {
    Eigen::Vector4d K{0.4072, 7.2373, 18.6269, 3.6725};
    Eigen::Matrix4d P = (Eigen::Matrix4d() << 1.0520, 0.2580, 1.2082, 0.1988,
                                              0.2580, 2.2108, 4.6631, 1.0090,
                                              1.2082, 4.6631, 33.9334, 4.0269,
                                              0.1988, 1.0090, 4.0269, 0.8424).finished();

    double lyapunov(const plants::IpState& s) const {
        const Eigen::Vector4d x = s.vec();
        return x.dot(P * x);
    }
};

inline double ip_bc_action(const plants::IpState& s, const IpBcParams& bc, const plants::IpParams& plant = {}) {
    return std::clamp(bc.K.dot(s.vec()), -plant.va_max, plant.va_max);
}

/// The pump-off fallback.
inline double ap_bc_action(const plants::ApState&) { return 0.0; }

struct RoverBcParams {
    double rotation_rate = std::numbers::pi;  // rad/s while stopped
    double cruise_fraction = 0.5;             // cruise at this fraction of v_max
    int heading_samples = 128;
};

/// Four-phase rover fallback: brake to a stop, pick a safe heading at random,
/// rotate to it, then cruise along it. Re-enters braking whenever its own next
/// state would be unrecoverable. One instance per trajectory.
class RoverBaseline {
public:
    enum class Phase { braking, choosing_heading, rotating, cruising, emergency_stop };

    explicit RoverBaseline(RoverBcParams params = {}) : params_(params) {}

    void reset() {
        phase_ = Phase::braking;
        heading_ = 0.0;
        rotation_steps_left_ = 0;
    }

    Phase phase() const { return phase_; }
    double chosen_heading() const { return heading_; }

    /// Forward clearance along `heading`: the smaller reading of the two rays that
    /// bracket it.
    static double clearance_along(const plants::RoverState& s, double heading, const plants::RoverParams& rp) {
        const int n = rp.sensor_count;
        const double spacing = 2.0 * std::numbers::pi / n;
        double rel = std::remainder(heading - s.theta, 2.0 * std::numbers::pi);
        if (rel < 0.0) rel += 2.0 * std::numbers::pi;
        int i = static_cast<int>(std::floor(rel / spacing)) % n;
        const int j = (i + 1) % n;
        return std::min(s.sensors[static_cast<std::size_t>(i)], s.sensors[static_cast<std::size_t>(j)]);
    }

    /// `recoverable` is the rover's recoverability predicate.
    template <class Recoverable>
    Eigen::Vector2d act(const plants::RoverState& s, const plants::RoverParams& rp, const plants::ObstacleField& field,
                        Recoverable&& recoverable, Rng& rng) {
        // Each phase either emits an action or hands over to the next one; the cap
        // only guards against a cruising -> braking -> cruising cycle within one call.
        for (int guard = 0; guard < 8; ++guard) {
            switch (phase_) {
                case Phase::braking: {
                    if (s.v > 0.0) {
                        const double mag = std::min(rp.a_max, s.v / rp.dt);
                        return {-mag * std::cos(s.theta), -mag * std::sin(s.theta)};
                    }
                    phase_ = Phase::choosing_heading;
                    break;
                }
                case Phase::choosing_heading: {
                    if (!pick_heading(s, rp, field, recoverable, rng)) {
                        phase_ = Phase::emergency_stop;
                        return {0.0, 0.0};
                    }
                    const double turn = std::abs(std::remainder(heading_ - s.theta, 2.0 * std::numbers::pi));
                    rotation_steps_left_ = static_cast<int>(std::ceil(turn / (params_.rotation_rate * rp.dt) - 1e-12));
                    phase_ = Phase::rotating;
                    break;
                }
                case Phase::rotating: {
                    if (rotation_steps_left_ > 0) {
                        --rotation_steps_left_;
                        return {0.0, 0.0};
                    }
                    phase_ = Phase::cruising;
                    break;
                }
                case Phase::cruising: {
                    const double target = params_.cruise_fraction * rp.v_max;
                    const double mag = std::clamp((target - s.v) / rp.dt, 0.0, rp.a_max);
                    const Eigen::Vector2d a{mag * std::cos(heading_), mag * std::sin(heading_)};
                    if (recoverable(plants::rover_step(s, a.x(), a.y(), rp, field))) return a;
                    phase_ = Phase::braking;
                    if (s.v <= 0.0) {
                        // Already stopped: a fresh heading is needed, not more braking.
                        phase_ = Phase::choosing_heading;
                    }
                    break;
                }
                case Phase::emergency_stop:
                    return {0.0, 0.0};
            }
        }
        phase_ = Phase::emergency_stop;
        return {0.0, 0.0};
    }

private:
    template <class Recoverable>
    bool pick_heading(const plants::RoverState& s, const plants::RoverParams& rp, const plants::ObstacleField& field,
                      Recoverable&& recoverable, Rng& rng) {
        std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
        const double needed = rp.d_safe + rp.max_braking_distance() + rp.epsilon;
        for (int k = 0; k < params_.heading_samples; ++k) {
            const double h = angle(rng);
            if (clearance_along(s, h, rp) < needed) continue;
            const double mag = std::min(rp.a_max, params_.cruise_fraction * rp.v_max / rp.dt);
            const auto next = plants::rover_step(s, mag * std::cos(h), mag * std::sin(h), rp, field);
            if (!recoverable(next)) continue;
            heading_ = h;
            return true;
        }
        return false;
    }

    RoverBcParams params_;
    Phase phase_ = Phase::braking;
    double heading_ = 0.0;
    int rotation_steps_left_ = 0;
};

}  // namespace nsa::controllers
