#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nsa/rl/training.hpp"
#include "nsa/runtime/systems.hpp"

namespace nsa::harness {

enum class PlantKind { ip, rover, ap };

inline std::string_view to_string(PlantKind p) {
    switch (p) {
        case PlantKind::ip: return "ip";
        case PlantKind::rover: return "rover";
        case PlantKind::ap: return "ap";
    }
    return "ip";
}

inline PlantKind plant_from_string(const std::string& s) {
    if (s == "ip") return PlantKind::ip;
    if (s == "rover") return PlantKind::rover;
    if (s == "ap") return PlantKind::ap;
    throw ConfigError("unknown plant '" + s + "' (expected ip, rover or ap)");
}

struct CheckpointRef {
    std::string label;
    std::string path;
};

/// Everything that determines a run, apart from the code version.
struct ExperimentConfig {
    PlantKind plant = PlantKind::ip;
    std::uint64_t seed = 1;
    std::string checkpoint;  // input agent checkpoint (run-nsa, extend-training)

    rl::TrainingConfig training;
    std::size_t curve_interval = 1000;
    bool log_transitions = false;

    std::size_t nsa_trajectories = 100;
    std::size_t nsa_max_trajectory_len = 500;
    bool retrain = true;
    bool collect_every_step = true;
    rl::NoiseSpec nsa_noise;
    std::size_t record_trajectories = 50;  // RunRecords written to records.jsonl

    std::size_t eval_trajectories = 100;
    std::uint64_t eval_seed = 1000;
    unsigned eval_workers = 1;
    std::size_t eval_max_trajectory_len = 500;
    std::vector<CheckpointRef> eval_checkpoints;

    std::vector<rl::SrlStrategy> strategies{rl::SrlStrategy::pua, rl::SrlStrategy::bc_filter,
                                            rl::SrlStrategy::rnd_filter};
    std::vector<std::size_t> extend_budgets{0};

    plants::IpParams ip;
    controllers::IpBcParams ip_bc;
    plants::RoverParams rover;
    controllers::RoverBcParams rover_bc;
    plants::FieldGenerationConfig field_gen;
    std::uint64_t field_seed = 7;
    std::string field_file;
    plants::ApParams ap;
    runtime::ApRecoverabilityConfig ap_recoverability;
    double ap_g_init_low = -3.0;
    double ap_g_init_high = 8.0;
    int rsc_horizon = 10;

    /// Normalized key=value dump of every setting, written next to each run's outputs.
    std::string describe() const;
};

/// Defaults per plant for the desk-scale experiments.
inline ExperimentConfig preset(PlantKind plant) {
    ExperimentConfig c;
    c.plant = plant;
    auto& t = c.training;
    switch (plant) {
        case PlantKind::ip:
            t.max_steps = 200000;
            t.noise = rl::NoiseSpec::gaussian(Vec::Constant(1, 0.5));
            t.r_unrecov = 0.0;
            break;
        case PlantKind::rover:
            t.max_steps = 500000;
            t.noise = rl::NoiseSpec::gaussian(Vec::Constant(2, 0.3));
            t.r_unrecov = runtime::kRoverUnrecoverableReward;
            t.ddpg.actor_hidden = {64, 64};
            t.ddpg.reward_scale = 1e-3;
            c.eval_trajectories = 200;
            break;
        case PlantKind::ap:
            t.max_steps = 5450;
            t.noise = rl::NoiseSpec::gaussian(Vec::Constant(1, 5.0));
            t.r_unrecov = runtime::ap_unrecoverable_reward();
            break;
    }
    c.nsa_noise = t.noise;
    return c;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    }
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ConfigError(key + ": integer out of range: '" + s + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + s + "'");
}

inline Vec parse_vec(const std::string& key, const std::string& s) {
    const auto items = split_list(s);
    if (items.empty()) throw ConfigError(key + ": empty list");
    Vec v(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_double(key, items[i]);
    return v;
}

inline std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(s)) out.push_back(parse_uint(key, item));
    return out;
}

/// Reads values out of the parsed INI, tracking which keys were consumed so that
/// typos surface as config errors.
class Reader {
public:
    explicit Reader(boost::property_tree::ptree tree) : tree_(std::move(tree)) {}

    std::optional<std::string> raw(const std::string& key) {
        seen_.insert(key);
        auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return *v;
    }

    void read(const std::string& key, double& out) {
        if (auto v = raw(key)) out = parse_double(key, *v);
    }
    void read(const std::string& key, int& out) {
        if (auto v = raw(key)) out = static_cast<int>(parse_uint(key, *v));
    }
    void read(const std::string& key, unsigned long& out) {
        if (auto v = raw(key)) out = parse_uint(key, *v);
    }
    void read(const std::string& key, unsigned long long& out) {
        if (auto v = raw(key)) out = parse_uint(key, *v);
    }
    void read(const std::string& key, unsigned& out) {
        if (auto v = raw(key)) out = static_cast<unsigned>(parse_uint(key, *v));
    }
    void read(const std::string& key, bool& out) {
        if (auto v = raw(key)) out = parse_bool(key, *v);
    }
    void read(const std::string& key, std::string& out) {
        if (auto v = raw(key)) out = *v;
    }

    void reject_unknown() const {
        for (const auto& [section, body] : tree_) {
            if (body.empty()) throw ConfigError("key '" + section + "' must be inside a [section]");
            for (const auto& [key, value] : body) {
                if (!seen_.count(section + "." + key)) {
                    throw ConfigError("unknown config key '" + key + "' in section [" + section + "]");
                }
            }
        }
    }

private:
    boost::property_tree::ptree tree_;
    std::set<std::string> seen_;
};

inline rl::NoiseSpec read_noise(Reader& r, const std::string& section, rl::NoiseSpec current, std::size_t dim) {
    std::string kind = current.kind == rl::NoiseSpec::Kind::none ? "none" : "gaussian";
    r.read(section + ".noise", kind);
    auto sigma_text = r.raw(section + ".noise_sigma");
    if (kind == "none") return rl::NoiseSpec::none();
    if (kind != "gaussian") throw ConfigError(section + ".noise: expected gaussian or none, got '" + kind + "'");
    Vec sigma = current.sigma.size() > 0 ? current.sigma : Vec::Zero(static_cast<Eigen::Index>(dim));
    if (sigma_text) {
        sigma = parse_vec(section + ".noise_sigma", *sigma_text);
        if (sigma.size() == 1 && dim > 1) sigma = Vec::Constant(static_cast<Eigen::Index>(dim), sigma(0));
    }
    if (static_cast<std::size_t>(sigma.size()) != dim) {
        throw ConfigError(section + ".noise_sigma: expected " + std::to_string(dim) + " values");
    }
    try {
        return rl::NoiseSpec::gaussian(sigma);
    } catch (const InvalidInput& e) {
        throw ConfigError(section + ".noise_sigma: " + e.what());
    }
}

inline std::size_t action_dim(PlantKind p) { return p == PlantKind::rover ? 2 : 1; }

}  // namespace detail

/// Parses INI text. The [experiment] plant key selects the preset; every other key
/// overrides it.
inline ExperimentConfig parse_config(const std::string& text) {
    boost::property_tree::ptree tree;
    try {
        std::istringstream in(text);
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    detail::Reader r(tree);
    std::string plant = "ip";
    r.read("experiment.plant", plant);
    ExperimentConfig c = preset(plant_from_string(plant));
    const std::size_t adim = detail::action_dim(c.plant);
    r.read("experiment.seed", c.seed);
    r.read("experiment.checkpoint", c.checkpoint);

    auto& t = c.training;
    r.read("training.steps", t.max_steps);
    r.read("training.max_trajectory_len", t.max_trajectory_len);
    r.read("training.warmup", t.warmup);
    r.read("training.buffer_capacity", t.buffer_capacity);
    if (auto s = r.raw("training.strategy")) t.strategy = rl::srl_strategy_from_string(*s);
    t.noise = detail::read_noise(r, "training", t.noise, adim);
    r.read("training.r_unrecov", t.r_unrecov);
    r.read("training.rnd_max_samples", t.rnd_max_samples);
    r.read("training.gamma", t.ddpg.gamma);
    r.read("training.tau", t.ddpg.tau);
    r.read("training.batch_size", t.ddpg.batch_size);
    r.read("training.actor_lr", t.ddpg.actor_lr);
    r.read("training.critic_lr", t.ddpg.critic_lr);
    r.read("training.reward_scale", t.ddpg.reward_scale);
    if (auto s = r.raw("training.actor_hidden")) t.ddpg.actor_hidden = detail::parse_sizes("training.actor_hidden", *s);
    if (auto s = r.raw("training.critic_hidden")) t.ddpg.critic_hidden = detail::parse_sizes("training.critic_hidden", *s);
    if (auto s = r.raw("training.actor_activation")) {
        try {
            t.ddpg.actor_activation = nn::activation_from_string(*s);
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("training.actor_activation: ") + e.what());
        }
    }
    r.read("training.curve_interval", c.curve_interval);
    r.read("training.log_transitions", c.log_transitions);

    c.nsa_noise = t.noise;
    r.read("nsa.trajectories", c.nsa_trajectories);
    r.read("nsa.max_trajectory_len", c.nsa_max_trajectory_len);
    r.read("nsa.retrain", c.retrain);
    r.read("nsa.collect_every_step", c.collect_every_step);
    r.read("nsa.record_trajectories", c.record_trajectories);
    c.nsa_noise = detail::read_noise(r, "nsa", c.nsa_noise, adim);

    r.read("eval.trajectories", c.eval_trajectories);
    r.read("eval.seed", c.eval_seed);
    r.read("eval.workers", c.eval_workers);
    r.read("eval.max_trajectory_len", c.eval_max_trajectory_len);
    if (auto s = r.raw("eval.checkpoints")) {
        for (const auto& item : detail::split_list(*s)) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) {
                c.eval_checkpoints.push_back({item, item});
            } else {
                c.eval_checkpoints.push_back({item.substr(0, eq), item.substr(eq + 1)});
            }
        }
    }

    if (auto s = r.raw("compare.strategies")) {
        c.strategies.clear();
        for (const auto& item : detail::split_list(*s)) c.strategies.push_back(rl::srl_strategy_from_string(item));
    }
    if (auto s = r.raw("extend.budgets")) c.extend_budgets = detail::parse_sizes("extend.budgets", *s);

    r.read("ip.dt", c.ip.dt);
    r.read("ip.p_max", c.ip.p_max);
    r.read("ip.v_max", c.ip.v_max);
    r.read("ip.theta_max", c.ip.theta_max);
    r.read("ip.va_max", c.ip.va_max);
    if (auto s = r.raw("ip.K")) {
        const Vec k = detail::parse_vec("ip.K", *s);
        if (k.size() != 4) throw ConfigError("ip.K: expected 4 values");
        c.ip_bc.K = k;
    }
    if (auto s = r.raw("ip.P")) {
        const Vec p = detail::parse_vec("ip.P", *s);
        if (p.size() != 16) throw ConfigError("ip.P: expected 16 values (row-major)");
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) c.ip_bc.P(i, j) = p(4 * i + j);
        if (!c.ip_bc.P.isApprox(c.ip_bc.P.transpose(), 0.0)) throw ConfigError("ip.P must be symmetric");
    }

    auto& rv = c.rover;
    r.read("rover.radius", rv.radius);
    r.read("rover.v_max", rv.v_max);
    r.read("rover.a_max", rv.a_max);
    r.read("rover.l_max", rv.l_max);
    r.read("rover.sensors", rv.sensor_count);
    r.read("rover.d_safe", rv.d_safe);
    r.read("rover.epsilon", rv.epsilon);
    r.read("rover.rsc_multiplier", rv.rsc_multiplier);
    r.read("rover.dt", rv.dt);
    r.read("rover.reach_distance", rv.reach_distance);
    r.read("rover.field_seed", c.field_seed);
    r.read("rover.field_file", c.field_file);
    r.read("rover.obstacles", c.field_gen.count);
    r.read("rover.min_obstacle_radius", c.field_gen.min_radius);
    r.read("rover.max_obstacle_radius", c.field_gen.max_radius);
    r.read("rover.bc_rotation_rate", c.rover_bc.rotation_rate);
    r.read("rover.bc_cruise_fraction", c.rover_bc.cruise_fraction);
    r.read("rover.bc_heading_samples", c.rover_bc.heading_samples);

    r.read("ap.p1", c.ap.p1);
    r.read("ap.p2", c.ap.p2);
    r.read("ap.p3", c.ap.p3);
    r.read("ap.ke", c.ap.ke);
    r.read("ap.ka", c.ap.ka);
    r.read("ap.VI", c.ap.VI);
    r.read("ap.u_max", c.ap.u_max);
    r.read("ap.substeps", c.ap.substeps);
    r.read("ap.recoverability_max_steps", c.ap_recoverability.max_steps);
    r.read("ap.g_init_low", c.ap_g_init_low);
    r.read("ap.g_init_high", c.ap_g_init_high);

    r.read("rsc.horizon", c.rsc_horizon);

    r.reject_unknown();

    if (t.max_trajectory_len == 0 || c.nsa_max_trajectory_len == 0 || c.eval_max_trajectory_len == 0) {
        throw ConfigError("trajectory lengths must be positive");
    }
    if (t.buffer_capacity == 0) throw ConfigError("training.buffer_capacity must be positive");
    if (t.ddpg.batch_size == 0) throw ConfigError("training.batch_size must be positive");
    if (!(t.ddpg.gamma >= 0.0 && t.ddpg.gamma <= 1.0)) throw ConfigError("training.gamma must lie in [0, 1]");
    if (!(t.ddpg.tau >= 0.0 && t.ddpg.tau <= 1.0)) throw ConfigError("training.tau must lie in [0, 1]");
    if (!(t.ddpg.actor_lr > 0.0 && t.ddpg.critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (t.ddpg.actor_hidden.empty() || t.ddpg.critic_hidden.empty()) throw ConfigError("hidden layer lists must be nonempty");
    if (c.eval_workers == 0) throw ConfigError("eval.workers must be at least 1");
    if (c.rsc_horizon < 1) throw ConfigError("rsc.horizon must be at least 1");
    if (!c.ap.valid()) throw ConfigError("ap parameters must all be positive");
    if (!(c.ap_g_init_low < c.ap_g_init_high)) throw ConfigError("ap.g_init_low must be below ap.g_init_high");
    if (!(rv.radius > 0 && rv.v_max > 0 && rv.a_max > 0 && rv.l_max > 0 && rv.sensor_count > 0 && rv.d_safe > 0 &&
          rv.epsilon >= 0 && rv.dt > 0 && rv.rsc_multiplier >= 1)) {
        throw ConfigError("rover parameters must be positive");
    }
    if (!(c.ip.dt > 0 && c.ip.va_max > 0)) throw ConfigError("ip.dt and ip.va_max must be positive");
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

inline std::string ExperimentConfig::describe() const {
    std::ostringstream o;
    o.precision(17);
    auto list = [](const auto& xs) {
        std::ostringstream s;
        s.precision(17);
        for (std::size_t i = 0; i < static_cast<std::size_t>(xs.size()); ++i) s << (i ? "," : "") << xs[i];
        return s.str();
    };
    auto vec = [](const Vec& v) {
        std::ostringstream s;
        s.precision(17);
        for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? "," : "") << v(i);
        return s.str();
    };
    auto noise = [&](const rl::NoiseSpec& n) {
        return n.kind == rl::NoiseSpec::Kind::none ? std::string("none") : "gaussian(" + vec(n.sigma) + ")";
    };
    const auto& t = training;
    o << "[experiment]\nplant = " << to_string(plant) << "\nseed = " << seed << "\ncheckpoint = " << checkpoint << "\n";
    o << "\n[training]\nsteps = " << t.max_steps << "\nmax_trajectory_len = " << t.max_trajectory_len
      << "\nwarmup = " << t.warmup << "\nbuffer_capacity = " << t.buffer_capacity
      << "\nstrategy = " << rl::to_string(t.strategy) << "\nnoise = " << noise(t.noise) << "\nr_unrecov = " << t.r_unrecov
      << "\ngamma = " << t.ddpg.gamma << "\ntau = " << t.ddpg.tau << "\nbatch_size = " << t.ddpg.batch_size
      << "\nactor_lr = " << t.ddpg.actor_lr << "\ncritic_lr = " << t.ddpg.critic_lr
      << "\nreward_scale = " << t.ddpg.reward_scale << "\nactor_hidden = " << list(t.ddpg.actor_hidden)
      << "\nactor_activation = " << nn::to_string(t.ddpg.actor_activation)
      << "\ncritic_hidden = " << list(t.ddpg.critic_hidden) << "\ncurve_interval = " << curve_interval << "\n";
    o << "\n[nsa]\ntrajectories = " << nsa_trajectories << "\nmax_trajectory_len = " << nsa_max_trajectory_len
      << "\nretrain = " << retrain << "\ncollect_every_step = " << collect_every_step
      << "\nnoise = " << noise(nsa_noise) << "\n";
    o << "\n[eval]\ntrajectories = " << eval_trajectories << "\nseed = " << eval_seed
      << "\nmax_trajectory_len = " << eval_max_trajectory_len << "\n";
    switch (plant) {
        case PlantKind::ip:
            o << "\n[ip]\ndt = " << ip.dt << "\nva_max = " << ip.va_max << "\nK = " << vec(ip_bc.K) << "\n";
            break;
        case PlantKind::rover:
            o << "\n[rover]\nfield_seed = " << field_seed << "\nfield_file = " << field_file
              << "\nsensors = " << rover.sensor_count << "\nd_safe = " << rover.d_safe << "\nepsilon = " << rover.epsilon
              << "\nrsc_multiplier = " << rover.rsc_multiplier << "\n";
            break;
        case PlantKind::ap:
            o << "\n[ap]\np1 = " << ap.p1 << "\np2 = " << ap.p2 << "\np3 = " << ap.p3 << "\nke = " << ap.ke
              << "\nka = " << ap.ka << "\nVI = " << ap.VI << "\nu_max = " << ap.u_max << "\n";
            break;
    }
    return o.str();
}

// ---------------------------------------------------------------------------

inline runtime::IpSystem make_ip_system(const ExperimentConfig& c) {
    runtime::IpSystem sys;
    sys.plant = c.ip;
    sys.bc = c.ip_bc;
    sys.rsc.horizon = c.rsc_horizon;
    sys.r_unrecov = c.training.r_unrecov;
    return sys;
}

inline plants::ObstacleField make_field(const ExperimentConfig& c) {
    if (!c.field_file.empty()) {
        try {
            return plants::load_field(c.field_file);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("rover.field_file: ") + e.what());
        }
    }
    return plants::generate_obstacle_field(c.field_seed, c.field_gen, c.rover);
}

inline runtime::RoverSystem make_rover_system(const ExperimentConfig& c) {
    runtime::RoverSystem sys(c.rover, make_field(c));
    sys.bc = c.rover_bc;
    sys.r_unrecov = c.training.r_unrecov;
    return sys;
}

inline runtime::ApSystem make_ap_system(const ExperimentConfig& c) {
    runtime::ApSystem sys;
    sys.plant = c.ap;
    sys.recoverability = c.ap_recoverability;
    sys.rsc.horizon = c.rsc_horizon;
    sys.r_unrecov = c.training.r_unrecov;
    sys.g_init_low = c.ap_g_init_low;
    sys.g_init_high = c.ap_g_init_high;
    return sys;
}

/// Calls fn with the configured system.
template <class Fn>
decltype(auto) with_system(const ExperimentConfig& c, Fn&& fn) {
    switch (c.plant) {
        case PlantKind::rover: {
            const auto sys = make_rover_system(c);
            return fn(sys);
        }
        case PlantKind::ap: {
            const auto sys = make_ap_system(c);
            return fn(sys);
        }
        case PlantKind::ip:
        default: {
            const auto sys = make_ip_system(c);
            return fn(sys);
        }
    }
}

}  // namespace nsa::harness
