#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "nsa/nn/checkpoint.hpp"
#include "nsa/plants/rover.hpp"
#include "nsa/rl/ddpg.hpp"

namespace nsa::harness {

/// Agent checkpoint: actor, critic, both targets and both optimizer states, tagged
/// with the plant it was trained on (and the obstacle field, for the rover).
inline nlohmann::json agent_to_json(const rl::DdpgAgent& agent, std::string_view plant,
                                    const plants::ObstacleField* field = nullptr) {
    const auto& cfg = agent.config();
    nlohmann::json j;
    j["format_version"] = nn::kCheckpointFormatVersion;
    j["plant"] = std::string(plant);
    j["action_low"] = nn::detail::vec_json(agent.policy().box().low);
    j["action_high"] = nn::detail::vec_json(agent.policy().box().high);
    j["ddpg"] = {{"gamma", cfg.gamma},         {"tau", cfg.tau},
                 {"batch_size", cfg.batch_size}, {"actor_lr", cfg.actor_lr},
                 {"critic_lr", cfg.critic_lr},   {"reward_scale", cfg.reward_scale}};
    j["update_count"] = agent.update_count();
    j["actor"] = nn::to_json(agent.policy().actor());
    j["critic"] = nn::to_json(agent.critic());
    j["actor_target"] = nn::to_json(agent.actor_target());
    j["critic_target"] = nn::to_json(agent.critic_target());
    j["actor_optimizer"] = nn::to_json(agent.actor_optimizer());
    j["critic_optimizer"] = nn::to_json(agent.critic_optimizer());
    if (field != nullptr) j["field"] = plants::to_json(*field);
    return j;
}

struct LoadedAgent {
    rl::DdpgAgent agent;
    std::string plant;
    std::optional<plants::ObstacleField> field;
};

inline LoadedAgent agent_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != nn::kCheckpointFormatVersion) {
            throw InvalidInput("unsupported agent checkpoint version");
        }
        LoadedAgent out;
        out.plant = j.at("plant").get<std::string>();
        const auto low = j.at("action_low").get<std::vector<double>>();
        const auto high = j.at("action_high").get<std::vector<double>>();
        const controllers::ActionBox box{Eigen::Map<const Vec>(low.data(), static_cast<Eigen::Index>(low.size())),
                                         Eigen::Map<const Vec>(high.data(), static_cast<Eigen::Index>(high.size()))};
        rl::DdpgConfig cfg;
        const auto& d = j.at("ddpg");
        cfg.gamma = d.at("gamma").get<double>();
        cfg.tau = d.at("tau").get<double>();
        cfg.batch_size = d.at("batch_size").get<std::size_t>();
        cfg.actor_lr = d.at("actor_lr").get<double>();
        cfg.critic_lr = d.at("critic_lr").get<double>();
        cfg.reward_scale = d.at("reward_scale").get<double>();
        nn::Mlp actor = nn::mlp_from_json(j.at("actor"));
        cfg.actor_hidden.assign(actor.layer_sizes().begin() + 1, actor.layer_sizes().end() - 1);
        cfg.actor_activation = actor.hidden_activation();
        nn::Mlp critic = nn::mlp_from_json(j.at("critic"));
        cfg.critic_hidden.assign(critic.layer_sizes().begin() + 1, critic.layer_sizes().end() - 1);
        out.agent = rl::DdpgAgent(controllers::NeuralController(std::move(actor), box), std::move(critic), cfg);
        out.agent.actor_target() = nn::mlp_from_json(j.at("actor_target"));
        out.agent.critic_target() = nn::mlp_from_json(j.at("critic_target"));
        if (!out.agent.actor_target().same_architecture(out.agent.policy().actor()) ||
            !out.agent.critic_target().same_architecture(out.agent.critic())) {
            throw InvalidInput("target networks do not match their online networks");
        }
        out.agent.actor_optimizer() = nn::optimizer_from_json(j.at("actor_optimizer"), out.agent.policy().actor());
        out.agent.critic_optimizer() = nn::optimizer_from_json(j.at("critic_optimizer"), out.agent.critic());
        out.agent.set_update_count(j.at("update_count").get<std::size_t>());
        if (j.contains("field")) out.field = plants::field_from_json(j.at("field"));
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed agent checkpoint: ") + e.what());
    }
}

inline void save_agent(const std::string& path, const rl::DdpgAgent& agent, std::string_view plant,
                       const plants::ObstacleField* field = nullptr) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path);
    out << agent_to_json(agent, plant, field).dump() << '\n';
    if (!out) throw InvalidInput("failed writing " + path);
}

inline LoadedAgent load_agent(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read agent checkpoint " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("malformed agent checkpoint " + path + ": " + e.what());
    }
    return agent_from_json(j);
}

/// The replay buffer travels next to the agent checkpoint as replay.bin.
inline std::string replay_path_for(const std::string& agent_path) {
    return (std::filesystem::path(agent_path).parent_path() / "replay.bin").string();
}

}  // namespace nsa::harness
