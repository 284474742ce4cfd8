#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

#include "nsa/rl/replay_buffer.hpp"
#include "nsa/runtime/nsa_loop.hpp"

namespace nsa::runtime {

inline nlohmann::json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

/// One line of records.jsonl.
inline nlohmann::json record_to_json(const RunRecord& rec, std::size_t trajectory) {
    nlohmann::json j;
    j["trajectory"] = trajectory;
    j["length"] = rec.length();
    j["return"] = rec.total_return;
    j["reached_goal"] = rec.reached_goal;
    j["updates"] = rec.updates;
    j["bc_steps"] = rec.bc_steps;
    auto& states = j["states"] = nlohmann::json::array();
    for (const auto& s : rec.states) states.push_back(vec_to_json(s));
    auto& actions = j["actions"] = nlohmann::json::array();
    for (const auto& a : rec.actions) actions.push_back(vec_to_json(a));
    auto& holders = j["holders"] = nlohmann::json::array();
    for (const auto h : rec.holders) holders.push_back(std::string(to_string(h)));
    j["rewards"] = rec.rewards;
    auto& sw = j["switches"] = nlohmann::json::array();
    for (const auto& e : rec.switches) sw.push_back({{"step", e.step}, {"to", std::string(to_string(e.to))}});
    return j;
}

inline void write_record_jsonl(std::ostream& out, const RunRecord& rec, std::size_t trajectory) {
    out << record_to_json(rec, trajectory).dump() << '\n';
}

inline std::string switch_csv_header() { return "trajectory,step,direction\n"; }

inline void write_switch_rows(std::ostream& out, const RunRecord& rec, std::size_t trajectory) {
    for (const auto& e : rec.switches) {
        out << trajectory << ',' << e.step << ',' << (e.to == Holder::bc ? "NC->BC" : "BC->NC") << '\n';
    }
}

/// Training episode log: one stored transition per line.
inline void write_transition_jsonl(std::ostream& out, const rl::Transition& t, std::size_t episode) {
    nlohmann::json j;
    j["episode"] = episode;
    j["state"] = vec_to_json(t.state);
    j["action"] = vec_to_json(t.action);
    j["next_state"] = vec_to_json(t.next_state);
    j["reward"] = t.reward;
    j["terminal"] = t.terminal;
    out << j.dump() << '\n';
}

}  // namespace nsa::runtime
