#include <gtest/gtest.h>

#include <sstream>

#include "nsa/rl/ddpg.hpp"
#include "nsa/runtime/nsa_loop.hpp"
#include "nsa/runtime/records.hpp"
#include "nsa/runtime/switching.hpp"
#include "nsa/runtime/systems.hpp"
#include "support/oracles.hpp"
#include "support/toy_system.hpp"

using namespace nsa;
using runtime::Holder;
using Toy = nsa::testing::ToySystem;
using nsa::testing::ToyState;

namespace {

controllers::NeuralController ip_k_policy(const runtime::IpSystem& sys) {
    return nsa::testing::affine_policy(sys.action_box(), sys.bc.K, 0.0);
}

controllers::NeuralController toy_constant(const Toy& sys, double a) {
    return nsa::testing::affine_policy(sys.action_box(), Vec::Zero(1), a);
}

// Rover at (3, 3) heading +x with a single circle whose nearest point lies `reading` ahead.
runtime::RoverSystem rover_with_wall_ahead(double reading, double radius = 0.5) {
    plants::ObstacleField f;
    f.circles.push_back({3.0 + reading + radius, 3.0, radius});
    return runtime::RoverSystem(plants::RoverParams{}, f);
}

// Minimum G over a long pump-off simulation with a fine explicit Euler grid.
double ap_pump_off_min_g(plants::ApState s, const plants::ApParams& p, int steps, int substeps) {
    double lo = s.G;
    for (int k = 0; k < steps; ++k) {
        s = oracle::ap_euler(s, 0.0, p, substeps);
        lo = std::min(lo, s.G);
    }
    return lo;
}

}  // namespace

// ---------------------------------------------------------------------------
// recoverability

TEST(Recoverability, RoverThresholds) {
    const plants::RoverParams p;
    plants::RoverState s;
    s.sensors.assign(static_cast<std::size_t>(p.sensor_count), 2.0);
    EXPECT_TRUE(runtime::rover_recoverable(s, p));
    s.sensors.assign(static_cast<std::size_t>(p.sensor_count), 0.22);
    EXPECT_TRUE(runtime::rover_recoverable(s, p));
    s.v = 0.8;
    s.sensors.assign(static_cast<std::size_t>(p.sensor_count), 2.0);
    s.sensors[3] = 0.41;
    EXPECT_TRUE(runtime::rover_recoverable(s, p)) << "threshold is exactly 0.41 at v_max";
    s.sensors[3] = 0.40;
    EXPECT_FALSE(runtime::rover_recoverable(s, p));
}

TEST(Recoverability, ApExamples) {
    const plants::ApParams p;
    EXPECT_TRUE(runtime::ap_recoverable({0.0, 0.0, 0.0}, p));
    EXPECT_FALSE(runtime::ap_recoverable({-3.9, 0.0, 0.0}, p));
    EXPECT_FALSE(runtime::ap_recoverable({-3.9, 0.0, 0.0}, p, {0}));
}

TEST(Recoverability, ApMatchesFineGridOracle) {
    const plants::ApParams p;
    int checked = 0, unrecoverable = 0;
    for (const double g : {-3.7, -3.5, -3.0, -2.0, 0.0, 2.0}) {
        for (const double i : {0.0, 5.0, 20.0, 40.0, 60.0, 100.0}) {
            for (const double x : {0.0, 200.0, 1000.0, 3000.0}) {
                const plants::ApState s{g, i, x};
                const double lo = ap_pump_off_min_g(s, p, 1500, 1000);
                if (std::abs(lo - p.hypo_threshold) < 1e-3) continue;  // too close to call
                const bool expected = lo >= p.hypo_threshold;
                EXPECT_EQ(runtime::ap_recoverable(s, p), expected) << "G=" << g << " I=" << i << " x=" << x;
                ++checked;
                unrecoverable += !expected;
            }
        }
    }
    EXPECT_GT(checked, 120);
    EXPECT_GT(unrecoverable, 10);
    EXPECT_LT(unrecoverable, checked - 10);
}

TEST(Recoverability, DisjointFromUnsafeSet) {
    Rng rng(11);
    const runtime::IpSystem ip;
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 10000; ++k) {
        const plants::IpState s{u(rng) * ip.plant.p_max, u(rng) * ip.plant.v_max, u(rng) * ip.plant.theta_max,
                                u(rng) * 3.0};
        if (ip.recoverable(s)) EXPECT_FALSE(ip.unsafe(s));
    }
    const runtime::ApSystem ap;
    std::uniform_real_distribution<double> g(-5, 12), i(0, 30), x(0, 1000);
    for (int k = 0; k < 2000; ++k) {
        const plants::ApState s{g(rng), i(rng), x(rng)};
        if (ap.recoverable(s)) EXPECT_FALSE(ap.unsafe(s));
    }
    const runtime::RoverSystem rover(plants::RoverParams{}, plants::generate_obstacle_field(7));
    std::uniform_real_distribution<double> pos(-5, 5), ang(-3.1, 3.1), v(0, 0.8);
    for (int k = 0; k < 5000; ++k) {
        const auto s = plants::make_rover_state(pos(rng), pos(rng), ang(rng), v(rng), rover.field, rover.plant);
        if (rover.recoverable(s) && plants::obstacle_clearance(s.x, s.y, rover.field) >= 0.0) {
            EXPECT_FALSE(rover.unsafe(s));
        }
    }
}

// ---------------------------------------------------------------------------
// FSC

TEST(Fsc, IpOriginWithZeroAction) {
    const runtime::IpSystem sys;
    EXPECT_FALSE(runtime::fsc(sys, plants::IpState{}, Vec::Zero(1)));
}

TEST(Fsc, RoverFullSpeedAtThreshold) {
    const auto sys = rover_with_wall_ahead(0.41);
    const auto s = plants::make_rover_state(3, 3, 0.0, 0.8, sys.field, sys.plant);
    ASSERT_NEAR(s.min_reading(), 0.41, 1e-12);
    ASSERT_TRUE(sys.recoverable(s));
    // a = 0: the rover covers 0.08 m, the forward reading drops to 0.33 < 0.41
    const auto next = sys.step(s, Vec::Zero(2));
    EXPECT_NEAR(next.min_reading(), 0.33, 1e-12);
    EXPECT_TRUE(runtime::fsc(sys, s, Vec::Zero(2)));
    // full braking: covers 0.04 m at v' = 0, needs 0.21; 0.37 remains
    EXPECT_FALSE(runtime::fsc(sys, s, Eigen::Vector2d(-1.6, 0.0)));
}

TEST(Fsc, ApAgreesWithOracle) {
    const runtime::ApSystem sys;
    const auto& p = sys.plant;
    const auto oracle_recoverable = [&](const plants::ApState& s) {
        return ap_pump_off_min_g(s, p, 1500, 200) >= p.hypo_threshold;
    };
    int fired = 0, quiet = 0;
    for (const double g : {-3.0, -2.0, 0.0}) {
        // subcutaneous depot level where the pump-off run just touches -3.8, by bisection on the oracle
        double lo = 0.0, hi = 20000.0;
        for (int k = 0; k < 40; ++k) {
            const double mid = 0.5 * (lo + hi);
            (oracle_recoverable({g, 20.0, mid}) ? lo : hi) = mid;
        }
        for (const double below : {40.0, 400.0}) {
            const plants::ApState s{g, 20.0, lo - below};
            for (const double u : {0.0, 100.0}) {
                const plants::ApState next = oracle::ap_euler(s, u, p, 100000);
                const double m = ap_pump_off_min_g(next, p, 1500, 1000);
                if (std::abs(m - p.hypo_threshold) < 1e-3) continue;
                const bool expected = m < p.hypo_threshold;
                EXPECT_EQ(runtime::fsc(sys, s, Vec::Constant(1, u)), expected)
                    << "G=" << g << " x=" << s.x << " u=" << u;
                (expected ? fired : quiet) += 1;
            }
        }
    }
    EXPECT_GT(fired, 0);
    EXPECT_GT(quiet, 0);
}

// ---------------------------------------------------------------------------
// RSC

TEST(Rsc, IpOriginWithSafePolicy) {
    const runtime::IpSystem sys;
    EXPECT_TRUE(runtime::rsc(sys, plants::IpState{}, ip_k_policy(sys)));
}

TEST(Rsc, HorizonCoversStepsZeroToT) {
    // x' = x + 0.1: from x = 0 the FSC first fires at x = 1.0 -> 1.1, i.e. at step 10.
    Toy sys;
    const auto nc = toy_constant(sys, 0.1);
    EXPECT_FALSE(runtime::rsc(sys, ToyState{0.0}, nc));
    EXPECT_TRUE(runtime::rsc(sys, ToyState{-0.15}, nc));
    sys.rsc.horizon = 9;
    EXPECT_TRUE(runtime::rsc(sys, ToyState{0.0}, nc));
}

TEST(Rsc, RoverMarginThreshold) {
    const runtime::RoverSystem sys(plants::RoverParams{}, {});
    EXPECT_NEAR(sys.margin_threshold(), 0.81, 1e-12);
    const auto near = rover_with_wall_ahead(0.80);
    const auto far = rover_with_wall_ahead(0.82);
    EXPECT_FALSE(near.margin_rsc(plants::make_rover_state(3, 3, 0.0, 0.0, near.field, near.plant)));
    EXPECT_TRUE(far.margin_rsc(plants::make_rover_state(3, 3, 0.0, 0.0, far.field, far.plant)));
}

namespace {

template <class S>
struct RscCount {
    std::size_t rsc_true = 0;
    std::size_t violations = 0;
};

template <class S, class Draw>
RscCount<S> rsc_implies_not_fsc(const S& sys, const controllers::NeuralController& nc, Draw draw, Rng& rng,
                                int n = 10000) {
    RscCount<S> out;
    for (int k = 0; k < n; ++k) {
        const auto s = draw(rng);
        if (!runtime::rsc(sys, s, nc)) continue;
        ++out.rsc_true;
        out.violations += runtime::fsc(sys, s, runtime::nc_action(nc, sys, s));
    }
    return out;
}

}  // namespace

TEST(Rsc, ImpliesNoFscIp) {
    const runtime::IpSystem sys;
    Rng rng(21);
    const auto nc = controllers::NeuralController::random(4, {32, 32}, nn::Activation::relu, sys.action_box(), rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto draw = [&](Rng& r) {
        return plants::IpState{u(r) * sys.plant.p_max, u(r) * sys.plant.v_max, u(r) * sys.plant.theta_max,
                               u(r) * 2.0};
    };
    const auto a = rsc_implies_not_fsc(sys, nc, draw, rng);
    const auto b = rsc_implies_not_fsc(sys, ip_k_policy(sys), draw, rng);
    EXPECT_EQ(a.violations + b.violations, 0u);
    EXPECT_GT(a.rsc_true + b.rsc_true, 500u);
}

TEST(Rsc, ImpliesNoFscAp) {
    const runtime::ApSystem sys;
    Rng rng(22);
    const auto nc = controllers::NeuralController::random(3, {64, 64}, nn::Activation::relu, sys.action_box(), rng);
    std::uniform_real_distribution<double> g(-3.8, 10.0), i(0.0, 20.0), x(0.0, 800.0);
    const auto draw = [&](Rng& r) { return plants::ApState{g(r), i(r), x(r)}; };
    const auto c = rsc_implies_not_fsc(sys, nc, draw, rng);
    EXPECT_EQ(c.violations, 0u);
    EXPECT_GT(c.rsc_true, 500u);
}

TEST(Rsc, ImpliesNoFscRover) {
    const runtime::RoverSystem sys(plants::RoverParams{}, plants::generate_obstacle_field(7));
    Rng rng(23);
    auto nc = controllers::NeuralController::random(sys.feature_dim(), {64, 64}, nn::Activation::relu,
                                                    sys.action_box(), rng);
    // push the actor towards saturated, arbitrary accelerations
    for (auto& l : nc.actor().layers()) l.weight *= 20.0;
    std::uniform_real_distribution<double> pos(-5, 5), ang(-3.14, 3.14), v(0, 0.8);
    const auto draw = [&](Rng& r) {
        for (;;) {
            auto s = plants::make_rover_state(pos(r), pos(r), ang(r), v(r), sys.field, sys.plant);
            if (!plants::rover_collides(s, sys.field, sys.plant)) return s;
        }
    };
    const auto c = rsc_implies_not_fsc(sys, nc, draw, rng);
    EXPECT_EQ(c.violations, 0u);
    EXPECT_GT(c.rsc_true, 1000u);
}

// ---------------------------------------------------------------------------
// DM

TEST(DecisionModule, ForwardSwitchOnFsc) {
    const Toy sys;
    const auto nc = toy_constant(sys, 2.0);
    const runtime::DmState dm;
    const auto next = runtime::dm_transition(dm, sys, ToyState{0.0}, nc.act(Vec::Zero(1)), nc, 4);
    EXPECT_EQ(next.holder, Holder::bc);
    EXPECT_EQ(next.forward_switches, 1u);
    EXPECT_EQ(next.reverse_switches, 0u);
    EXPECT_EQ(next.last_switch_step, 4);
}

TEST(DecisionModule, NcKeepsControlWithoutFsc) {
    const Toy sys;
    const auto nc = toy_constant(sys, 0.5);
    const auto next = runtime::dm_transition({}, sys, ToyState{0.0}, Vec::Constant(1, 0.5), nc, 0);
    EXPECT_EQ(next.holder, Holder::nc);
    EXPECT_EQ(next.forward_switches, 0u);
    EXPECT_EQ(next.last_switch_step, -1);
}

TEST(DecisionModule, BcHoldsWhileRscFalse) {
    const Toy sys;
    const auto nc = toy_constant(sys, 2.0);
    runtime::DmState dm;
    dm.holder = Holder::bc;
    const auto next = runtime::dm_transition(dm, sys, ToyState{0.0}, Vec::Constant(1, 2.0), nc, 3);
    EXPECT_EQ(next.holder, Holder::bc);
    EXPECT_EQ(next.reverse_switches, 0u);
}

TEST(DecisionModule, ReverseSwitchOnRsc) {
    const Toy sys;
    const auto nc = toy_constant(sys, 0.0);
    runtime::DmState dm;
    dm.holder = Holder::bc;
    dm.forward_switches = 1;
    const auto next = runtime::dm_transition(dm, sys, ToyState{0.3}, Vec::Zero(1), nc, 9);
    EXPECT_EQ(next.holder, Holder::nc);
    EXPECT_EQ(next.reverse_switches, 1u);
    EXPECT_EQ(next.forward_switches, 1u);
    EXPECT_EQ(next.last_switch_step, 9);
}

// ---------------------------------------------------------------------------
// AM

TEST(AdaptationModule, RoverRewardFar) {
    const runtime::RoverSystem sys(plants::RoverParams{}, {});
    const auto s = plants::make_rover_state(1.0, 0.0, 0.0, 0.0, sys.field, sys.plant);
    const auto t = runtime::am_collect(sys, s, Vec::Zero(2));
    EXPECT_DOUBLE_EQ(t.reward, -1.0 - 20.0 * 1.0);
    EXPECT_FALSE(t.terminal);
    EXPECT_EQ(t.state, sys.features(s));
}

TEST(AdaptationModule, RoverFscRewardIsTerminal) {
    const auto sys = rover_with_wall_ahead(0.41);
    const auto s = plants::make_rover_state(3, 3, 0.0, 0.8, sys.field, sys.plant);
    const auto t = runtime::am_collect(sys, s, Vec::Zero(2));
    EXPECT_EQ(t.reward, -20000.0);
    EXPECT_TRUE(t.terminal);
}

TEST(AdaptationModule, RoverTargetReward) {
    const runtime::RoverSystem sys(plants::RoverParams{}, {});
    const auto s = plants::make_rover_state(0.25, 0.0, std::numbers::pi, 0.8, sys.field, sys.plant);
    const auto t = runtime::am_collect(sys, s, Vec::Zero(2));
    EXPECT_EQ(t.reward, 10000.0);
    EXPECT_TRUE(t.terminal);
}

TEST(AdaptationModule, RoverFscTakesPrecedenceOverTarget) {
    plants::ObstacleField f;
    f.circles.push_back({-0.28, 0.0, 0.1});
    const runtime::RoverSystem sys(plants::RoverParams{}, f);
    const auto s = plants::make_rover_state(0.25, 0.0, std::numbers::pi, 0.8, sys.field, sys.plant);
    ASSERT_TRUE(sys.recoverable(s));
    const auto next = sys.step(s, Vec::Zero(2));
    ASSERT_LE(plants::distance_to_target(next, sys.plant), 0.2);
    const auto t = runtime::am_collect(sys, s, Vec::Zero(2));
    EXPECT_EQ(t.reward, -20000.0);
    EXPECT_TRUE(t.terminal);
}

TEST(AdaptationModule, IpUnrecoverableRewardIsZero) {
    const runtime::IpSystem sys;
    const plants::IpState s{0.0, 0.0, 0.0, 0.0};
    plants::IpState edge = s;
    // walk towards the ellipsoid boundary until full force leaves it
    Vec a = Vec::Constant(1, sys.plant.va_max);
    for (int k = 0; k < 200 && !runtime::fsc(sys, edge, a); ++k) edge = sys.step(edge, a);
    ASSERT_TRUE(sys.recoverable(edge));
    ASSERT_TRUE(runtime::fsc(sys, edge, a));
    const auto t = runtime::am_collect(sys, edge, a);
    EXPECT_EQ(t.reward, 0.0);
    EXPECT_TRUE(t.terminal);

    const auto ok = runtime::am_collect(sys, s, Vec::Zero(1));
    const auto next = sys.step(s, Vec::Zero(1));
    EXPECT_EQ(ok.reward, 10.0 - 10.0 * next.v * next.v - (1.0 - std::cos(next.theta)));
}

namespace {

struct ToyHarness {
    Toy sys;
    rl::DdpgAgent agent;
    rl::ReplayBuffer buffer{10000, 1, 1};
    Rng rng{5};

    explicit ToyHarness(double bias) {
        rl::DdpgConfig cfg;
        cfg.actor_hidden = {8};
        cfg.critic_hidden = {16};
        agent = rl::DdpgAgent::create(1, sys.action_box(), cfg, rng);
        agent.policy().actor().layers().back().bias.setConstant(bias);
        for (int k = 0; k < 100; ++k) buffer.push({Vec::Constant(1, 0.0), Vec::Constant(1, 0.0), Vec::Constant(1, 0.0), 1.0, false});
    }
};

}  // namespace

TEST(AdaptationModule, OneUpdatePerBcStepWhenWarm) {
    ToyHarness h(10.0);  // tanh saturates: NC proposes a = 2 everywhere, FSC at every state
    runtime::AdaptationModule am{&h.buffer, &h.agent, {true, true, rl::NoiseSpec::none()}};
    auto bc = h.sys.make_baseline();
    const auto rec = runtime::run_nsa_trajectory(h.sys, ToyState{0.2}, h.agent.policy(), bc, &am, {61}, h.rng);
    EXPECT_EQ(rec.length(), 61u);
    EXPECT_EQ(rec.bc_steps, 61u);
    EXPECT_EQ(rec.updates, 61u);
    EXPECT_EQ(am.updates, 61u);
    EXPECT_EQ(rec.forward_switches(), 1u);
    EXPECT_EQ(bc.resets, 1);
    EXPECT_EQ(h.buffer.size(), 161u);
}

TEST(AdaptationModule, NoUpdatesWithoutLeavingNc) {
    ToyHarness h(0.0);
    runtime::AdaptationModule am{&h.buffer, &h.agent, {true, true, rl::NoiseSpec::none()}};
    auto bc = h.sys.make_baseline();
    const auto rec = runtime::run_nsa_trajectory(h.sys, ToyState{0.1}, h.agent.policy(), bc, &am, {}, h.rng);
    EXPECT_EQ(rec.length(), 500u);
    EXPECT_EQ(rec.bc_steps, 0u);
    EXPECT_EQ(rec.updates, 0u);
    EXPECT_EQ(h.buffer.size(), 600u) << "collect-every-step still gathers shadow samples";
}

TEST(AdaptationModule, ColdBufferSkipsUpdates) {
    ToyHarness h(10.0);
    rl::ReplayBuffer empty(1000, 1, 1);
    runtime::AdaptationModule am{&empty, &h.agent, {true, false, rl::NoiseSpec::none()}};
    auto bc = h.sys.make_baseline();
    const auto rec = runtime::run_nsa_trajectory(h.sys, ToyState{0.0}, h.agent.policy(), bc, &am, {100}, h.rng);
    // collect only while the BC holds: the batch of 64 is ready from the 64th BC step on
    EXPECT_EQ(rec.bc_steps, 100u);
    EXPECT_EQ(am.skipped_updates, 63u);
    EXPECT_EQ(rec.updates, 37u);
}

TEST(AdaptationModule, UpdatesEqualBcStepsOnIp) {
    const runtime::IpSystem sys;
    Rng rng(31);
    rl::DdpgConfig cfg;
    auto agent = rl::DdpgAgent::create(4, sys.action_box(), cfg, rng);
    for (auto& l : agent.policy().actor().layers()) l.weight *= 8.0;
    rl::ReplayBuffer buf(100000, 4, 1);
    for (int k = 0; k < 64; ++k) buf.push({Vec::Zero(4), Vec::Zero(1), Vec::Zero(4), 10.0, false});
    runtime::AdaptationModule am{&buf, &agent, {true, true, rl::NoiseSpec::gaussian(Vec::Constant(1, 1.0))}};
    auto bc = sys.make_baseline();
    std::size_t bc_steps = 0, switched = 0;
    for (int k = 0; k < 20; ++k) {
        const auto rec = runtime::run_nsa_trajectory(sys, sys.sample_initial_state(rng), agent.policy(), bc, &am,
                                                     {200}, rng);
        EXPECT_EQ(rec.updates, rec.bc_steps);
        bc_steps += rec.bc_steps;
        switched += rec.forward_switches() > 0;
    }
    EXPECT_GT(switched, 0u);
    EXPECT_EQ(am.updates, bc_steps);
}

// ---------------------------------------------------------------------------
// NSA trajectory

TEST(NsaTrajectory, SafeNcNeverSwitches) {
    const runtime::IpSystem sys;
    auto nc = ip_k_policy(sys);
    auto bc = sys.make_baseline();
    Rng rng(41);
    for (int k = 0; k < 10; ++k) {
        const auto rec = runtime::run_nsa_trajectory(sys, sys.sample_initial_state(rng), nc, bc, nullptr, {}, rng);
        EXPECT_TRUE(rec.switches.empty());
        EXPECT_EQ(rec.length(), 500u);
        EXPECT_EQ(rec.bc_steps, 0u);
    }
}

TEST(NsaTrajectory, UnsafeInitialStateIsSafetyViolation) {
    const runtime::IpSystem sys;
    auto nc = ip_k_policy(sys);
    auto bc = sys.make_baseline();
    Rng rng(42);
    const plants::IpState s{2.0 * sys.plant.p_max, 0, 0, 0};
    ASSERT_TRUE(sys.unsafe(s));
    EXPECT_THROW(runtime::run_nsa_trajectory(sys, s, nc, bc, nullptr, {}, rng), SafetyViolation);
}

TEST(NsaTrajectory, UnrecoverableInitialStateIsRejected) {
    const runtime::IpSystem sys;
    auto nc = ip_k_policy(sys);
    auto bc = sys.make_baseline();
    Rng rng(43);
    const plants::IpState s{0.0, 0.9 * sys.plant.v_max, 0.0, 1.0};
    ASSERT_FALSE(sys.unsafe(s));
    ASSERT_FALSE(sys.recoverable(s));
    EXPECT_THROW(runtime::run_nsa_trajectory(sys, s, nc, bc, nullptr, {}, rng), InvalidInput);
}

TEST(NsaTrajectory, ToySwitchSequenceByHand) {
    // NC: a = 0.6. From 0.5 the NC would reach 1.1, so the BC takes over and returns
    // to 0. RSC at 0 (NC then climbs 0.6 -> 1.2) is false, so the BC keeps control.
    Toy sys;
    auto nc = toy_constant(sys, 0.6);
    auto bc = sys.make_baseline();
    Rng rng(44);
    const auto rec = runtime::run_nsa_trajectory(sys, ToyState{0.5}, nc, bc, nullptr, {5}, rng);
    ASSERT_EQ(rec.switches.size(), 1u);
    EXPECT_EQ(rec.switches[0].step, 0u);
    EXPECT_EQ(rec.switches[0].to, Holder::bc);
    for (const auto h : rec.holders) EXPECT_EQ(h, Holder::bc);
    EXPECT_EQ(rec.states[1](0), 0.0);

    // With a = 0.05 the NC stays safe for 10 steps from 0: control returns immediately.
    auto slow = toy_constant(sys, 0.05);
    const auto back = runtime::run_nsa_trajectory(sys, ToyState{0.98}, slow, bc, nullptr, {3}, rng);
    ASSERT_EQ(back.switches.size(), 2u);
    EXPECT_EQ(back.switches[0].to, Holder::bc);
    EXPECT_EQ(back.switches[1].step, 1u);
    EXPECT_EQ(back.switches[1].to, Holder::nc);
    EXPECT_EQ(back.holders, (std::vector<Holder>{Holder::bc, Holder::nc, Holder::nc}));
}

TEST(NsaTrajectory, ReplayReproducesHolderSequence) {
    const runtime::IpSystem sys;
    Rng rng(45);
    auto nc = controllers::NeuralController::random(4, {32, 32}, nn::Activation::relu, sys.action_box(), rng);
    for (auto& l : nc.actor().layers()) l.weight *= 6.0;
    auto bc = sys.make_baseline();
    std::size_t with_switches = 0;
    for (int k = 0; k < 30; ++k) {
        const auto s0 = sys.sample_initial_state(rng);
        const auto rec = runtime::run_nsa_trajectory(sys, s0, nc, bc, nullptr, {}, rng);
        with_switches += !rec.switches.empty();
        runtime::DmState dm;
        auto s = s0;
        for (std::size_t t = 0; t < rec.length(); ++t) {
            dm = runtime::dm_transition(dm, sys, s, runtime::nc_action(nc, sys, s), nc, static_cast<long>(t));
            ASSERT_EQ(dm.holder, rec.holders[t]) << "trajectory " << k << " step " << t;
            s = sys.step(s, rec.actions[t]);
            ASSERT_EQ(sys.state_vector(s), rec.states[t + 1]);
        }
        EXPECT_EQ(dm.forward_switches, rec.forward_switches());
    }
    EXPECT_GT(with_switches, 0u);
}

TEST(NsaTrajectory, SafetyHoldsWithRetrainingOnAllPlants) {
    Rng rng(46);
    {
        const runtime::IpSystem sys;
        auto agent = rl::DdpgAgent::create(4, sys.action_box(), {}, rng);
        for (auto& l : agent.policy().actor().layers()) l.weight *= 5.0;
        rl::ReplayBuffer buf(100000, 4, 1);
        runtime::AdaptationModule am{&buf, &agent, {true, true, rl::NoiseSpec::gaussian(Vec::Constant(1, 1.0))}};
        auto bc = sys.make_baseline();
        for (int k = 0; k < 50; ++k) {
            EXPECT_NO_THROW(runtime::run_nsa_trajectory(sys, sys.sample_initial_state(rng), agent.policy(), bc, &am,
                                                        {}, rng));
        }
    }
    {
        const runtime::ApSystem sys;
        auto agent = rl::DdpgAgent::create(3, sys.action_box(), {}, rng);
        agent.policy().actor().layers().back().bias.setConstant(2.0);  // near-maximal insulin
        rl::ReplayBuffer buf(100000, 3, 1);
        runtime::AdaptationModule am{&buf, &agent, {true, true, rl::NoiseSpec::gaussian(Vec::Constant(1, 10.0))}};
        auto bc = sys.make_baseline();
        std::size_t switched = 0;
        for (int k = 0; k < 30; ++k) {
            const auto rec =
                runtime::run_nsa_trajectory(sys, sys.sample_initial_state(rng), agent.policy(), bc, &am, {}, rng);
            for (const auto& st : rec.states) EXPECT_GE(st(0), sys.plant.hypo_threshold);
            switched += rec.forward_switches() > 0;
        }
        EXPECT_GT(switched, 0u);
    }
    {
        const runtime::RoverSystem sys(plants::RoverParams{}, plants::generate_obstacle_field(7));
        auto agent = rl::DdpgAgent::create(sys.feature_dim(), sys.action_box(), {}, rng);
        for (auto& l : agent.policy().actor().layers()) l.weight *= 10.0;
        rl::ReplayBuffer buf(100000, sys.feature_dim(), 2);
        runtime::AdaptationModule am{&buf, &agent, {true, true, rl::NoiseSpec::gaussian(Vec::Constant(2, 0.3))}};
        auto bc = sys.make_baseline();
        for (int k = 0; k < 20; ++k) {
            const auto rec = runtime::run_nsa_trajectory(sys, sys.sample_initial_state(rng), agent.policy(), bc, &am,
                                                         {200}, rng);
            for (const auto& st : rec.states) {
                double lo = std::numeric_limits<double>::infinity();
                for (Eigen::Index i = 4; i < st.size(); ++i) lo = std::min(lo, st(i));
                EXPECT_GE(lo, sys.plant.d_safe - 1e-9);
            }
        }
    }
}

TEST(NsaTrajectory, SwitchCsvMatchesRecord) {
    Toy sys;
    auto slow = toy_constant(sys, 0.05);
    auto bc = sys.make_baseline();
    Rng rng(47);
    const auto rec = runtime::run_nsa_trajectory(sys, ToyState{0.98}, slow, bc, nullptr, {3}, rng);
    std::ostringstream csv;
    csv << runtime::switch_csv_header();
    runtime::write_switch_rows(csv, rec, 7);
    EXPECT_EQ(csv.str(), "trajectory,step,direction\n7,0,NC->BC\n7,1,BC->NC\n");

    std::ostringstream line;
    runtime::write_record_jsonl(line, rec, 7);
    const auto j = nlohmann::json::parse(line.str());
    EXPECT_EQ(j["trajectory"], 7);
    EXPECT_EQ(j["holders"].size(), rec.length());
    EXPECT_EQ(j["states"].size(), rec.length() + 1);
    EXPECT_EQ(j["switches"][0]["to"], "BC");
    EXPECT_EQ(j["switches"][1]["step"], 1);
}

// ---------------------------------------------------------------------------
// rewards

TEST(Reward, ApContinuousAtBreakpoints) {
    // each adjacent pair of branch formulas written out independently
    const auto near = [](double g) { return 10.0 - std::abs(g); };
    const auto high = [](double g) { return 14.0 - 5.0 * g; };
    const auto very_high = [](double g) { return 26.8 - 9.0 * g; };
    const auto low = [](double g) { return 16.0 + 7.0 * g; };
    const auto very_low = [](double g) { return 65.4 + 20.0 * g; };
    EXPECT_NEAR(near(1.0), high(1.0), 1e-9);
    EXPECT_NEAR(high(3.2), very_high(3.2), 1e-9);
    EXPECT_NEAR(high(3.2), -2.0, 1e-9);
    EXPECT_NEAR(near(-1.0), low(-1.0), 1e-9);
    EXPECT_NEAR(low(-3.8), very_low(-3.8), 1e-9);
    for (const double g : {1.0, 3.2, -1.0, -3.8}) {
        const double left = runtime::ap_performance_reward(std::nextafter(g, -100.0));
        const double right = runtime::ap_performance_reward(std::nextafter(g, 100.0));
        EXPECT_NEAR(left, right, 1e-9) << "G' = " << g;
        EXPECT_NEAR(runtime::ap_performance_reward(g), left, 1e-9);
    }
    EXPECT_DOUBLE_EQ(runtime::ap_performance_reward(0.0), 10.0);
    EXPECT_DOUBLE_EQ(runtime::ap_performance_reward(5.0), very_high(5.0));
    EXPECT_DOUBLE_EQ(runtime::ap_performance_reward(-5.0), very_low(-5.0));
}

TEST(Reward, IpFormula) {
    const plants::IpState next{0.3, 0.2, 0.1, -0.4};
    EXPECT_EQ(runtime::ip_performance_reward(next), 10.0 - 10.0 * 0.2 * 0.2 - (1.0 - std::cos(0.1)));
    EXPECT_EQ(runtime::shaped_reward(true, 0.0, 7.0), 0.0);
    EXPECT_EQ(runtime::shaped_reward(false, 0.0, 7.0), 7.0);
}
