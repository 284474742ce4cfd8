// nsa: command-line driver for training, NSA runs and evaluation.
//
// Exit codes: 0 success, 1 runtime failure (e.g. training divergence),
// 2 configuration error, 3 safety-assertion failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "nsa/harness/commands.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string checkpoint;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config, "experiment config (INI)")->required();
    sub->add_option("--seed", args.seed, "master seed (overrides [experiment] seed)");
    sub->add_option("--out", args.out, "output directory")->required();
    sub->add_option("--checkpoint", args.checkpoint, "input agent checkpoint (overrides [experiment] checkpoint)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural Simplex Architecture experiments"};
    app.require_subcommand(1);
    CommonArgs args;
    using Command = nsa::harness::MetricsTable (*)(const nsa::harness::ExperimentConfig&, const std::string&);
    Command command = nullptr;
    const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
        {"train", {"initial DDPG training", &nsa::harness::cmd_train}},
        {"run-nsa", {"NSA trajectories with online retraining", &nsa::harness::cmd_run_nsa}},
        {"eval", {"evaluate checkpoints on a shared initial-state set", &nsa::harness::cmd_eval}},
        {"compare-srl", {"train and compare PUA / BC_FILTER / RND_FILTER", &nsa::harness::cmd_compare_srl}},
        {"extend-training", {"continue initial training for extra budgets", &nsa::harness::cmd_extend_training}},
    };
    for (const auto& [name, entry] : commands) {
        auto* sub = app.add_subcommand(name, entry.first);
        add_common(sub, args);
        sub->callback([&command, fn = entry.second] { command = fn; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        auto cfg = nsa::harness::load_config(args.config);
        if (args.seed) cfg.seed = *args.seed;
        if (!args.checkpoint.empty()) cfg.checkpoint = args.checkpoint;
        const auto table = command(cfg, args.out);
        std::cout << table.csv();
        return 0;
    } catch (const nsa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const nsa::SafetyViolation& e) {
        std::cerr << "safety assertion failed: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
