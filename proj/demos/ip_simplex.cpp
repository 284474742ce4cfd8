// Trains a deliberately weak pendulum controller, wraps it in the simplex loop
// with online retraining, and compares the controller before and after.

#include <iostream>

#include "nsa/harness/commands.hpp"

using namespace nsa;

int main() {
    auto c = harness::preset(harness::PlantKind::ip);
    c.seed = 5;
    c.training.max_steps = 5000;
    c.nsa_trajectories = 200;
    c.eval_trajectories = 50;

    const auto sys = harness::make_ip_system(c);
    auto trained = harness::train_fresh(sys, c);
    const auto states = harness::eval_states(sys, c);
    const auto before = harness::evaluate(sys, trained.agent.policy(), states, c);

    const auto run = harness::run_nsa(sys, trained.agent, trained.buffer, c, [](const runtime::RunRecord& rec,
                                                                                std::size_t i) {
        if (i < 5) {
            std::cout << "trajectory " << i << ": " << rec.length() << " steps, " << rec.forward_switches()
                      << " switches to the baseline\n";
        }
    });
    const auto after = harness::evaluate(sys, trained.agent.policy(), states, c);

    std::cout << run.switching_trajectories() << " of " << run.trajectories.size()
              << " trajectories needed the baseline, " << run.updates << " retraining updates\n";
    std::cout << "unrecoverable before/after retraining: " << before.unrecoverable << " / " << after.unrecoverable
              << " of " << states.size() << "\n";
    std::cout << "average return before/after: " << before.avg_return << " / " << after.avg_return << "\n";
}
