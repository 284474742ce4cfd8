#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nsa/harness/agent_io.hpp"
#include "nsa/harness/config.hpp"
#include "nsa/harness/metrics.hpp"
#include "nsa/rl/evaluation.hpp"
#include "nsa/rl/training.hpp"
#include "nsa/runtime/nsa_loop.hpp"
#include "nsa/runtime/records.hpp"

namespace nsa::harness {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Building blocks shared by the commands and the acceptance suite.

template <runtime::ControlSystem S>
rl::DdpgAgent fresh_agent(const S& sys, const ExperimentConfig& c) {
    Rng init = substream(c.seed, "init");
    return rl::DdpgAgent::create(sys.feature_dim(), sys.action_box(), c.training.ddpg, init);
}

template <runtime::ControlSystem S>
rl::ReplayBuffer fresh_buffer(const S& sys, const ExperimentConfig& c) {
    return rl::ReplayBuffer(c.training.buffer_capacity, sys.feature_dim(), sys.action_box().dim());
}

template <runtime::ControlSystem S>
std::vector<typename S::State> eval_states(const S& sys, const ExperimentConfig& c) {
    return rl::initial_state_set(sys, c.eval_trajectories, c.eval_seed);
}

template <runtime::ControlSystem S>
rl::EvalReport evaluate(const S& sys, const controllers::NeuralController& policy,
                        const std::vector<typename S::State>& states, const ExperimentConfig& c) {
    return rl::evaluate_policy(sys, policy, states, c.training.ddpg.gamma, c.eval_max_trajectory_len, c.eval_workers);
}

struct TrainResult {
    rl::DdpgAgent agent;
    rl::ReplayBuffer buffer;
    std::vector<rl::CurveRow> curve;
    std::size_t episodes = 0;
    std::size_t aborted_episodes = 0;
};

/// Initial training from a fresh agent; all randomness from the "train" substream.
template <runtime::ControlSystem S>
TrainResult train_fresh(const S& sys, const ExperimentConfig& c, const rl::TransitionSink& sink = {},
                        rl::DdpgAgent* last_good = nullptr) {
    TrainResult r{fresh_agent(sys, c), fresh_buffer(sys, c), {}, 0, 0};
    Rng rng = substream(c.seed, "train");
    std::size_t steps = 0;
    std::size_t next_snapshot = c.curve_interval;
    if (last_good) *last_good = r.agent;
    r.curve = rl::train(sys, r.agent, c.training, r.buffer, rng, c.curve_interval, sink, [&](const rl::EpisodeStats& ep) {
        ++r.episodes;
        r.aborted_episodes += ep.aborted ? 1 : 0;
        if (ep.aborted) std::cerr << "episode " << r.episodes << " aborted: " << ep.error << '\n';
        steps += std::max<std::size_t>(ep.length, 1);
        if (last_good && c.curve_interval > 0 && steps >= next_snapshot) {
            *last_good = r.agent;
            while (next_snapshot <= steps) next_snapshot += c.curve_interval;
        }
    });
    return r;
}

/// Continues training an existing agent/buffer for `steps` more environment steps.
template <runtime::ControlSystem S>
void continue_training(const S& sys, rl::DdpgAgent& agent, rl::ReplayBuffer& buf, const ExperimentConfig& c,
                       std::size_t steps, Rng& rng) {
    if (steps == 0) return;
    rl::TrainingConfig t = c.training;
    t.max_steps = steps;
    rl::train(sys, agent, t, buf, rng, 0);
}

struct TrajectorySummary {
    std::size_t length = 0;
    double total_return = 0.0;
    std::size_t forward_switches = 0;
    std::size_t reverse_switches = 0;
    std::size_t bc_steps = 0;
    std::size_t updates = 0;
    bool reached_goal = false;
};

struct NsaRunResult {
    std::vector<TrajectorySummary> trajectories;
    std::size_t updates = 0;
    std::size_t skipped_updates = 0;
    std::size_t bc_steps = 0;
    std::size_t forward_switches = 0;
    std::size_t reverse_switches = 0;

    std::size_t switching_trajectories() const {
        return static_cast<std::size_t>(std::count_if(trajectories.begin(), trajectories.end(),
                                                      [](const auto& t) { return t.forward_switches > 0; }));
    }
    /// Fraction of trajectories with a forward switch within [begin, end).
    double switch_rate(std::size_t begin, std::size_t end) const {
        if (end <= begin) return 0.0;
        std::size_t n = 0;
        for (std::size_t i = begin; i < end; ++i) n += trajectories[i].forward_switches > 0 ? 1 : 0;
        return static_cast<double>(n) / static_cast<double>(end - begin);
    }
};

using RecordSink = std::function<void(const runtime::RunRecord&, std::size_t)>;

/// N NSA trajectories with shadow-mode retraining of `agent` (when enabled) on the
/// shared buffer. Initial states come from the "nsa-initial-state" substream.
template <runtime::ControlSystem S>
NsaRunResult run_nsa(const S& sys, rl::DdpgAgent& agent, rl::ReplayBuffer& buf, const ExperimentConfig& c,
                     const RecordSink& sink = {}) {
    NsaRunResult result;
    Rng rng = substream(c.seed, "nsa");
    runtime::AdaptationModule am{&buf, &agent, {c.retrain, c.collect_every_step, c.nsa_noise}};
    runtime::NsaConfig ncfg{c.nsa_max_trajectory_len};
    auto bc = sys.make_baseline();
    for (std::size_t i = 0; i < c.nsa_trajectories; ++i) {
        Rng init = substream(c.seed, "nsa-initial-state", i);
        const auto s0 = sys.sample_initial_state(init);
        bc.reset();
        const runtime::RunRecord rec = runtime::run_nsa_trajectory(sys, s0, agent.policy(), bc, &am, ncfg, rng);
        TrajectorySummary t;
        t.length = rec.length();
        t.total_return = rec.total_return;
        t.forward_switches = rec.forward_switches();
        t.reverse_switches = rec.switches.size() - t.forward_switches;
        t.bc_steps = rec.bc_steps;
        t.updates = rec.updates;
        t.reached_goal = rec.reached_goal;
        result.trajectories.push_back(t);
        result.updates += t.updates;
        result.bc_steps += t.bc_steps;
        result.forward_switches += t.forward_switches;
        result.reverse_switches += t.reverse_switches;
        if (sink) sink(rec, i);
    }
    result.skipped_updates = am.skipped_updates;
    return result;
}

// ---------------------------------------------------------------------------
// File plumbing.

inline void ensure_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw ConfigError("cannot create output directory " + out);
}

inline std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

inline void write_config_copy(const ExperimentConfig& c, const std::string& out) {
    MetricsTable::write_text(join(out, "config.ini"), c.describe());
}

inline void write_curve(const std::vector<rl::CurveRow>& curve, const std::string& path) {
    std::string text = "step,mean_episode_return,unrecoverable_fraction,episodes\n";
    for (const auto& r : curve) {
        text += std::to_string(r.step) + "," + fmt_g(r.mean_episode_return) + "," + fmt_g(r.unrecoverable_fraction) +
                "," + std::to_string(r.episodes) + "\n";
    }
    MetricsTable::write_text(path, text);
}

template <runtime::ControlSystem S>
const plants::ObstacleField* field_of(const S& sys) {
    if constexpr (std::is_same_v<S, runtime::RoverSystem>) {
        return &sys.field;
    } else {
        return nullptr;
    }
}

template <runtime::ControlSystem S>
void save_agent_for(const S& sys, const rl::DdpgAgent& agent, const std::string& path) {
    save_agent(path, agent, sys.name(), field_of(sys));
}

/// Loads a checkpoint and checks that it was trained for this system.
template <runtime::ControlSystem S>
rl::DdpgAgent load_agent_for(const S& sys, const std::string& path) {
    if (path.empty()) throw ConfigError("no checkpoint given (set [experiment] checkpoint or --checkpoint)");
    if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
    LoadedAgent loaded;
    try {
        loaded = load_agent(path);
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    if (loaded.plant != sys.name()) {
        throw ConfigError(path + " was trained for plant '" + loaded.plant + "', not '" + std::string(sys.name()) + "'");
    }
    const auto& actor = loaded.agent.policy().actor();
    if (actor.input_size() != sys.feature_dim() || actor.output_size() != sys.action_box().dim() ||
        loaded.agent.policy().box().low != sys.action_box().low ||
        loaded.agent.policy().box().high != sys.action_box().high) {
        throw ConfigError(path + ": network architecture does not match the plant");
    }
    if constexpr (std::is_same_v<S, runtime::RoverSystem>) {
        if (!loaded.field || plants::to_json(*loaded.field) != plants::to_json(sys.field)) {
            throw ConfigError(path + " was trained on a different obstacle field");
        }
    }
    return loaded.agent;
}

template <runtime::ControlSystem S>
rl::ReplayBuffer load_buffer_for(const S& sys, const std::string& agent_path, const ExperimentConfig& c) {
    const std::string path = replay_path_for(agent_path);
    if (!fs::exists(path)) {
        std::cerr << "no replay buffer next to " << agent_path << "; starting with an empty one\n";
        return fresh_buffer(sys, c);
    }
    rl::ReplayBuffer buf;
    try {
        buf = rl::ReplayBuffer::load_file(path);
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    if (buf.state_dim() != sys.feature_dim() || buf.action_dim() != sys.action_box().dim()) {
        throw ConfigError(path + ": replay buffer dimensions do not match the plant");
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Commands. Each writes its outputs under `out` and returns the main table.

inline MetricsTable cmd_train(const ExperimentConfig& c, const std::string& out) {
    ensure_dir(out);
    write_config_copy(c, out);
    return with_system(c, [&](const auto& sys) {
        if (const auto* field = field_of(sys)) plants::save_field(*field, join(out, "field.json"));
        std::ofstream episodes;
        std::size_t episode = 0;
        rl::TransitionSink sink;
        if (c.log_transitions) {
            episodes.open(join(out, "episodes.jsonl"));
            sink = [&](const rl::Transition& t) {
                runtime::write_transition_jsonl(episodes, t, episode);
                if (t.terminal) ++episode;
            };
        }
        rl::DdpgAgent last_good;
        TrainResult r;
        try {
            r = train_fresh(sys, c, sink, &last_good);
        } catch (const TrainingDivergence&) {
            save_agent_for(sys, last_good, join(out, "agent.json"));
            std::cerr << "training diverged; last good checkpoint kept in " << join(out, "agent.json") << '\n';
            throw;
        }
        save_agent_for(sys, r.agent, join(out, "agent.json"));
        r.buffer.save(join(out, "replay.bin"));
        write_curve(r.curve, join(out, "curve.csv"));
        MetricsTable table(c.plant);
        table.add("IT", evaluate(sys, r.agent.policy(), eval_states(sys, c), c));
        table.write(join(out, "eval.csv"));
        return table;
    });
}

inline MetricsTable cmd_run_nsa(const ExperimentConfig& c, const std::string& out) {
    ensure_dir(out);
    write_config_copy(c, out);
    return with_system(c, [&](const auto& sys) {
        rl::DdpgAgent agent = load_agent_for(sys, c.checkpoint);
        const rl::DdpgAgent initial = agent;
        rl::ReplayBuffer buf = load_buffer_for(sys, c.checkpoint, c);

        std::ofstream records(join(out, "records.jsonl"), std::ios::binary);
        std::ofstream switches(join(out, "switches.csv"), std::ios::binary);
        if (!records || !switches) throw ConfigError("cannot write into " + out);
        switches << runtime::switch_csv_header();
        const NsaRunResult run = run_nsa(sys, agent, buf, c, [&](const runtime::RunRecord& rec, std::size_t i) {
            if (i < c.record_trajectories) runtime::write_record_jsonl(records, rec, i);
            runtime::write_switch_rows(switches, rec, i);
        });

        std::string traj = "trajectory,length,return,forward_switches,reverse_switches,bc_steps,updates,reached_goal\n";
        for (std::size_t i = 0; i < run.trajectories.size(); ++i) {
            const auto& t = run.trajectories[i];
            traj += std::to_string(i) + "," + std::to_string(t.length) + "," + fmt_g(t.total_return) + "," +
                    std::to_string(t.forward_switches) + "," + std::to_string(t.reverse_switches) + "," +
                    std::to_string(t.bc_steps) + "," + std::to_string(t.updates) + "," +
                    (t.reached_goal ? "1" : "0") + "\n";
        }
        MetricsTable::write_text(join(out, "trajectories.csv"), traj);

        const std::size_t n = run.trajectories.size();
        std::string summary = "key,value\n";
        summary += "trajectories," + std::to_string(n) + "\n";
        summary += "forward_switch_trajectories," + std::to_string(run.switching_trajectories()) + "\n";
        summary += "forward_switches," + std::to_string(run.forward_switches) + "\n";
        summary += "reverse_switches," + std::to_string(run.reverse_switches) + "\n";
        summary += "bc_steps," + std::to_string(run.bc_steps) + "\n";
        summary += "updates," + std::to_string(run.updates) + "\n";
        summary += "skipped_updates," + std::to_string(run.skipped_updates) + "\n";
        summary += "unsafe_states,0\n";
        summary += "first_quartile_switch_rate," + fmt_g(run.switch_rate(0, n / 4)) + "\n";
        summary += "last_quartile_switch_rate," + fmt_g(run.switch_rate(n - n / 4, n)) + "\n";
        MetricsTable::write_text(join(out, "summary.csv"), summary);

        save_agent_for(sys, agent, join(out, "agent.json"));
        buf.save(join(out, "replay.bin"));

        const auto states = eval_states(sys, c);
        MetricsTable table(c.plant);
        table.add("IT", evaluate(sys, initial.policy(), states, c));
        table.add("RT", evaluate(sys, agent.policy(), states, c));
        table.write(join(out, "eval.csv"));
        return table;
    });
}

inline MetricsTable cmd_eval(const ExperimentConfig& c, const std::string& out) {
    ensure_dir(out);
    write_config_copy(c, out);
    std::vector<CheckpointRef> refs = c.eval_checkpoints;
    if (refs.empty() && !c.checkpoint.empty()) refs.push_back({"policy", c.checkpoint});
    if (refs.empty()) throw ConfigError("nothing to evaluate: set [eval] checkpoints or --checkpoint");
    return with_system(c, [&](const auto& sys) {
        const auto states = eval_states(sys, c);
        MetricsTable table(c.plant);
        for (const auto& ref : refs) table.add(ref.label, evaluate(sys, load_agent_for(sys, ref.path).policy(), states, c));
        table.write(join(out, "metrics.csv"));
        return table;
    });
}

inline MetricsTable cmd_compare_srl(const ExperimentConfig& c, const std::string& out) {
    ensure_dir(out);
    write_config_copy(c, out);
    if (c.strategies.empty()) throw ConfigError("compare.strategies is empty");
    return with_system(c, [&](const auto& sys) {
        const auto states = eval_states(sys, c);
        MetricsTable table(c.plant);
        for (const auto strategy : c.strategies) {
            ExperimentConfig variant = c;
            variant.training.strategy = strategy;
            const std::string name(rl::to_string(strategy));
            const std::string dir = join(out, name);
            ensure_dir(dir);
            TrainResult r = train_fresh(sys, variant);
            save_agent_for(sys, r.agent, join(dir, "agent.json"));
            write_curve(r.curve, join(dir, "curve.csv"));
            table.add(name, evaluate(sys, r.agent.policy(), states, c));
        }
        table.write(join(out, "srl_comparison.csv"));
        return table;
    });
}

inline MetricsTable cmd_extend_training(const ExperimentConfig& c, const std::string& out) {
    ensure_dir(out);
    write_config_copy(c, out);
    std::vector<std::size_t> budgets = c.extend_budgets;
    std::sort(budgets.begin(), budgets.end());
    budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
    return with_system(c, [&](const auto& sys) {
        rl::DdpgAgent agent = load_agent_for(sys, c.checkpoint);
        rl::ReplayBuffer buf = load_buffer_for(sys, c.checkpoint, c);
        const auto states = eval_states(sys, c);
        MetricsTable table(c.plant);
        table.add("IT", evaluate(sys, agent.policy(), states, c));
        Rng rng = substream(c.seed, "extend");
        std::size_t done = 0;
        for (const std::size_t b : budgets) {
            continue_training(sys, agent, buf, c, b - done, rng);
            done = b;
            table.add("+" + budget_label(b) + " EIT", evaluate(sys, agent.policy(), states, c));
        }
        save_agent_for(sys, agent, join(out, "agent.json"));
        table.write(join(out, "extended_training.csv"));
        return table;
    });
}

}  // namespace nsa::harness
