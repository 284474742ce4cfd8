#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <random>
#include <string_view>

#include "nsa/common.hpp"
#include "nsa/controllers/baseline.hpp"
#include "nsa/controllers/neural.hpp"
#include "nsa/runtime/recoverability.hpp"
#include "nsa/runtime/reward.hpp"

namespace nsa::runtime {

/// Reverse-switching construction: simulate the NC for `horizon` steps, or require
/// a clearance margin of `multiplier` worst-case steps (rover).
struct RscConfig {
    enum class Mode { horizon, margin };
    Mode mode = Mode::horizon;
    int horizon = 10;
    int multiplier = 5;
};

/// A plant bundled with everything the generic NSA and training loops need: its
/// dynamics f, feature map, recoverability, unsafe set, reward, fallback and
/// initial-state distribution.
template <class S>
concept ControlSystem = requires(const S& sys, const typename S::State& s, const Vec& a, Rng& rng,
                                 typename S::Baseline& bc) {
    { sys.name() } -> std::convertible_to<std::string_view>;
    { sys.feature_dim() } -> std::convertible_to<std::size_t>;
    { sys.action_box() } -> std::convertible_to<controllers::ActionBox>;
    { sys.step(s, a) } -> std::same_as<typename S::State>;
    { sys.features(s) } -> std::same_as<Vec>;
    { sys.state_vector(s) } -> std::same_as<Vec>;
    { sys.recoverable(s) } -> std::same_as<bool>;
    { sys.unsafe(s) } -> std::same_as<bool>;
    { sys.goal_reached(s) } -> std::same_as<bool>;
    { sys.performance_reward(s, a, s) } -> std::same_as<double>;
    { sys.unrecoverable_reward() } -> std::same_as<double>;
    { sys.sample_initial_state(rng) } -> std::same_as<typename S::State>;
    { sys.rsc_config() } -> std::convertible_to<RscConfig>;
    { sys.make_baseline() } -> std::same_as<typename S::Baseline>;
    { bc.act(sys, s, rng) } -> std::same_as<Vec>;
    bc.reset();
};

// ---------------------------------------------------------------------------

class IpSystem {
public:
    using State = plants::IpState;

    struct Baseline {
        void reset() {}
        Vec act(const IpSystem& sys, const State& s, Rng&) const {
            return Vec::Constant(1, controllers::ip_bc_action(s, sys.bc, sys.plant));
        }
    };

    plants::IpParams plant;
    controllers::IpBcParams bc;
    RscConfig rsc{RscConfig::Mode::horizon, 10, 5};
    double r_unrecov = 0.0;
    double initial_level = 0.8;  // initial states satisfy x^T P x <= initial_level

    std::string_view name() const { return "ip"; }
    std::size_t feature_dim() const { return 4; }
    controllers::ActionBox action_box() const {
        return {Vec::Constant(1, -plant.va_max), Vec::Constant(1, plant.va_max)};
    }
    State step(const State& s, const Vec& a) const { return plants::ip_step(s, a(0), plant); }
    Vec features(const State& s) const { return s.vec(); }
    Vec state_vector(const State& s) const { return s.vec(); }
    bool recoverable(const State& s) const { return ip_recoverable(s, bc); }
    bool unsafe(const State& s) const { return !s.finite() || !plant.in_safety_box(s); }
    bool goal_reached(const State&) const { return false; }
    double performance_reward(const State&, const Vec&, const State& next) const {
        return ip_performance_reward(next);
    }
    double unrecoverable_reward() const { return r_unrecov; }
    RscConfig rsc_config() const { return rsc; }
    Baseline make_baseline() const { return {}; }

    /// Uniform over {x^T P x <= initial_level}, by rejection from its bounding box
    /// clipped to the safety box.
    State sample_initial_state(Rng& rng) const {
        const Eigen::Matrix4d Pinv = bc.P.inverse();
        Eigen::Vector4d extent;
        for (int i = 0; i < 4; ++i) extent(i) = std::sqrt(initial_level * Pinv(i, i));
        extent(0) = std::min(extent(0), plant.p_max);
        extent(1) = std::min(extent(1), plant.v_max);
        extent(2) = std::min(extent(2), plant.theta_max);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (;;) {
            State s{extent(0) * u(rng), extent(1) * u(rng), extent(2) * u(rng), extent(3) * u(rng)};
            if (bc.lyapunov(s) <= initial_level) return s;
        }
    }
};

// ---------------------------------------------------------------------------

class RoverSystem {
public:
    using State = plants::RoverState;

    struct Baseline {
        controllers::RoverBaseline procedure;

        void reset() { procedure.reset(); }
        Vec act(const RoverSystem& sys, const State& s, Rng& rng) {
            const Eigen::Vector2d a = procedure.act(
                s, sys.plant, sys.field, [&sys](const State& st) { return sys.recoverable(st); }, rng);
            return a;
        }
    };

    plants::RoverParams plant;
    plants::ObstacleField field;
    controllers::RoverBcParams bc;
    RscConfig rsc{RscConfig::Mode::margin, 10, 5};
    double r_unrecov = kRoverUnrecoverableReward;
    double spawn_half_extent = 5.0;
    double unsafe_slack = 1e-9;

    RoverSystem() = default;
    RoverSystem(plants::RoverParams p, plants::ObstacleField f) : plant(p), field(std::move(f)) {
        rsc.multiplier = p.rsc_multiplier;
    }

    std::string_view name() const { return "rover"; }
    std::size_t feature_dim() const { return 4 + static_cast<std::size_t>(plant.sensor_count); }
    controllers::ActionBox action_box() const {
        return {Vec::Constant(2, -plant.a_max), Vec::Constant(2, plant.a_max)};
    }
    State step(const State& s, const Vec& a) const { return plants::rover_step(s, a(0), a(1), plant, field); }

    /// [x, y, theta, v, l_1..l_n], each scaled to roughly unit range.
    Vec features(const State& s) const {
        Vec f(static_cast<Eigen::Index>(feature_dim()));
        f(0) = s.x / spawn_half_extent;
        f(1) = s.y / spawn_half_extent;
        f(2) = s.theta / std::numbers::pi;
        f(3) = s.v / plant.v_max;
        for (std::size_t i = 0; i < s.sensors.size(); ++i) {
            f(static_cast<Eigen::Index>(4 + i)) = s.sensors[i] / plant.l_max;
        }
        return f;
    }
    Vec state_vector(const State& s) const {
        Vec v(static_cast<Eigen::Index>(4 + s.sensors.size()));
        v(0) = s.x;
        v(1) = s.y;
        v(2) = s.theta;
        v(3) = s.v;
        for (std::size_t i = 0; i < s.sensors.size(); ++i) v(static_cast<Eigen::Index>(4 + i)) = s.sensors[i];
        return v;
    }
    bool recoverable(const State& s) const { return rover_recoverable(s, plant); }
    bool unsafe(const State& s) const {
        return plants::rover_collides(s, field, plant) || s.min_reading() < plant.d_safe - unsafe_slack;
    }
    bool goal_reached(const State& s) const { return plants::distance_to_target(s, plant) <= plant.reach_distance; }
    double performance_reward(const State&, const Vec&, const State& next) const {
        return rover_performance_reward(next, plant);
    }
    double unrecoverable_reward() const { return r_unrecov; }
    RscConfig rsc_config() const { return rsc; }
    Baseline make_baseline() const { return {controllers::RoverBaseline(bc)}; }

    /// l_min >= m v_max dt + d_safe + d_br_max + epsilon
    double margin_threshold() const {
        return rsc.multiplier * plant.v_max * plant.dt + plant.d_safe + plant.max_braking_distance() + plant.epsilon;
    }
    bool margin_rsc(const State& s) const { return s.min_reading() >= margin_threshold(); }

    State sample_initial_state(Rng& rng) const {
        std::uniform_real_distribution<double> pos(-spawn_half_extent, spawn_half_extent);
        std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
        for (;;) {
            const double x = pos(rng);
            const double y = pos(rng);
            const double th = heading(rng);
            if (plants::obstacle_clearance(x, y, field) < plant.radius) continue;
            State s = plants::make_rover_state(x, y, th, 0.0, field, plant);
            if (!recoverable(s) || goal_reached(s)) continue;
            return s;
        }
    }
};

// ---------------------------------------------------------------------------

class ApSystem {
public:
    using State = plants::ApState;

    struct Baseline {
        void reset() {}
        Vec act(const ApSystem&, const State& s, Rng&) const { return Vec::Constant(1, controllers::ap_bc_action(s)); }
    };

    plants::ApParams plant;
    ApRecoverabilityConfig recoverability;
    RscConfig rsc{RscConfig::Mode::horizon, 10, 5};
    double r_unrecov = ap_unrecoverable_reward();
    double g_init_low = -3.0;
    double g_init_high = 8.0;
    // feature scaling
    double g_scale = 4.0;
    double i_scale = 20.0;
    double x_scale = 1000.0;

    std::string_view name() const { return "ap"; }
    std::size_t feature_dim() const { return 3; }
    controllers::ActionBox action_box() const { return {Vec::Constant(1, 0.0), Vec::Constant(1, plant.u_max)}; }
    State step(const State& s, const Vec& a) const { return plants::ap_step(s, a(0), plant); }
    Vec features(const State& s) const { return Eigen::Vector3d(s.G / g_scale, s.I / i_scale, s.x / x_scale); }
    Vec state_vector(const State& s) const { return s.vec(); }
    bool recoverable(const State& s) const { return ap_recoverable(s, plant, recoverability); }
    bool unsafe(const State& s) const { return !(s.G >= plant.hypo_threshold); }
    bool goal_reached(const State&) const { return false; }
    double performance_reward(const State&, const Vec&, const State& next) const {
        return ap_performance_reward(next.G);
    }
    double unrecoverable_reward() const { return r_unrecov; }
    RscConfig rsc_config() const { return rsc; }
    Baseline make_baseline() const { return {}; }

    /// G uniform in [g_init_low, g_init_high] with the pump-off insulin equilibrium I = x = 0.
    State sample_initial_state(Rng& rng) const {
        std::uniform_real_distribution<double> g(g_init_low, g_init_high);
        for (;;) {
            State s{g(rng), 0.0, 0.0};
            if (recoverable(s)) return s;
        }
    }
};

static_assert(ControlSystem<IpSystem>);
static_assert(ControlSystem<RoverSystem>);
static_assert(ControlSystem<ApSystem>);

}  // namespace nsa::runtime
