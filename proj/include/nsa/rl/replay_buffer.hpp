#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nsa/common.hpp"

namespace nsa::rl {

/// One training sample (s, a, s', r, terminal). `state`/`next_state` are the
/// network-input features of the plant states.
struct Transition {
    Vec state;
    Vec action;
    Vec next_state;
    double reward = 0.0;
    bool terminal = false;
};

/// Column-per-sample minibatch.
struct Batch {
    Mat states;
    Mat actions;
    Mat next_states;
    Vec rewards;
    Vec terminal;  // 1.0 for terminal samples

    Eigen::Index size() const { return rewards.size(); }
};

/// Bounded FIFO of transitions stored in flat arrays; when full, a push
/// overwrites the oldest entry.
class ReplayBuffer {
public:
    ReplayBuffer() = default;

    ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
        : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
        if (capacity == 0) throw InvalidInput("replay buffer capacity must be positive");
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    std::size_t state_dim() const { return state_dim_; }
    std::size_t action_dim() const { return action_dim_; }

    void push(const Transition& t) {
        if (static_cast<std::size_t>(t.state.size()) != state_dim_ ||
            static_cast<std::size_t>(t.next_state.size()) != state_dim_ ||
            static_cast<std::size_t>(t.action.size()) != action_dim_) {
            throw InvalidInput("transition shape does not match the replay buffer");
        }
        if (!std::isfinite(t.reward)) throw InvalidInput("transition reward must be finite");
        std::size_t slot;
        if (size_ < capacity_) {
            slot = size_++;
            states_.resize(size_ * state_dim_);
            next_states_.resize(size_ * state_dim_);
            actions_.resize(size_ * action_dim_);
            rewards_.resize(size_);
            terminal_.resize(size_);
        } else {
            slot = head_;
            head_ = (head_ + 1) % capacity_;
        }
        std::memcpy(&states_[slot * state_dim_], t.state.data(), state_dim_ * sizeof(double));
        std::memcpy(&next_states_[slot * state_dim_], t.next_state.data(), state_dim_ * sizeof(double));
        std::memcpy(&actions_[slot * action_dim_], t.action.data(), action_dim_ * sizeof(double));
        rewards_[slot] = t.reward;
        terminal_[slot] = t.terminal ? 1 : 0;
    }

    /// i = 0 is the oldest entry.
    Transition at(std::size_t i) const {
        if (i >= size_) throw InvalidInput("replay buffer index out of range");
        return load(physical(i));
    }

    Transition newest() const { return at(size_ - 1); }

    /// Whether a k-sample minibatch update should run (the not-ready signal for callers).
    bool ready(std::size_t k) const { return k > 0 && size_ >= k; }

    /// k uniform draws with replacement (a size-1 buffer yields k copies); nullopt
    /// only when the buffer is empty or k is 0.
    std::optional<Batch> sample_batch(std::size_t k, Rng& rng) const {
        if (k == 0 || size_ == 0) return std::nullopt;
        std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
        Batch b;
        const auto n = static_cast<Eigen::Index>(k);
        b.states.resize(static_cast<Eigen::Index>(state_dim_), n);
        b.next_states.resize(static_cast<Eigen::Index>(state_dim_), n);
        b.actions.resize(static_cast<Eigen::Index>(action_dim_), n);
        b.rewards.resize(n);
        b.terminal.resize(n);
        for (Eigen::Index c = 0; c < n; ++c) {
            const std::size_t slot = pick(rng);
            std::memcpy(b.states.col(c).data(), &states_[slot * state_dim_], state_dim_ * sizeof(double));
            std::memcpy(b.next_states.col(c).data(), &next_states_[slot * state_dim_], state_dim_ * sizeof(double));
            std::memcpy(b.actions.col(c).data(), &actions_[slot * action_dim_], action_dim_ * sizeof(double));
            b.rewards(c) = rewards_[slot];
            b.terminal(c) = terminal_[slot] ? 1.0 : 0.0;
        }
        return b;
    }

    std::optional<std::vector<Transition>> sample(std::size_t k, Rng& rng) const {
        if (k == 0 || size_ == 0) return std::nullopt;
        std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
        std::vector<Transition> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) out.push_back(load(pick(rng)));
        return out;
    }

    // Binary layout: magic, capacity, state_dim, action_dim, size, then `size`
    // records oldest-first as raw little-endian doubles.
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InvalidInput("cannot write replay buffer " + path);
        const std::uint64_t header[5] = {kMagic, capacity_, state_dim_, action_dim_, size_};
        out.write(reinterpret_cast<const char*>(header), sizeof(header));
        for (std::size_t i = 0; i < size_; ++i) {
            const std::size_t slot = physical(i);
            out.write(reinterpret_cast<const char*>(&states_[slot * state_dim_]), std::streamsize(state_dim_ * 8));
            out.write(reinterpret_cast<const char*>(&actions_[slot * action_dim_]), std::streamsize(action_dim_ * 8));
            out.write(reinterpret_cast<const char*>(&next_states_[slot * state_dim_]), std::streamsize(state_dim_ * 8));
            const double tail[2] = {rewards_[slot], terminal_[slot] ? 1.0 : 0.0};
            out.write(reinterpret_cast<const char*>(tail), sizeof(tail));
        }
        if (!out) throw InvalidInput("failed writing replay buffer " + path);
    }

    static ReplayBuffer load_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InvalidInput("cannot read replay buffer " + path);
        std::uint64_t header[5];
        in.read(reinterpret_cast<char*>(header), sizeof(header));
        if (!in || header[0] != kMagic) throw InvalidInput("not a replay buffer file: " + path);
        ReplayBuffer buf(header[1], header[2], header[3]);
        Transition t{Vec(header[2]), Vec(header[3]), Vec(header[2]), 0.0, false};
        for (std::uint64_t i = 0; i < header[4]; ++i) {
            in.read(reinterpret_cast<char*>(t.state.data()), std::streamsize(header[2] * 8));
            in.read(reinterpret_cast<char*>(t.action.data()), std::streamsize(header[3] * 8));
            in.read(reinterpret_cast<char*>(t.next_state.data()), std::streamsize(header[2] * 8));
            double tail[2];
            in.read(reinterpret_cast<char*>(tail), sizeof(tail));
            if (!in) throw InvalidInput("truncated replay buffer " + path);
            t.reward = tail[0];
            t.terminal = tail[1] != 0.0;
            buf.push(t);
        }
        return buf;
    }

private:
    static constexpr std::uint64_t kMagic = 0x4e53415245504c31ULL;  // "NSAREPL1"

    std::size_t physical(std::size_t logical) const {
        return size_ < capacity_ ? logical : (head_ + logical) % capacity_;
    }

    Transition load(std::size_t slot) const {
        Transition t;
        t.state = Eigen::Map<const Vec>(&states_[slot * state_dim_], static_cast<Eigen::Index>(state_dim_));
        t.next_state = Eigen::Map<const Vec>(&next_states_[slot * state_dim_], static_cast<Eigen::Index>(state_dim_));
        t.action = Eigen::Map<const Vec>(&actions_[slot * action_dim_], static_cast<Eigen::Index>(action_dim_));
        t.reward = rewards_[slot];
        t.terminal = terminal_[slot] != 0;
        return t;
    }

    std::size_t capacity_ = 1;
    std::size_t state_dim_ = 0;
    std::size_t action_dim_ = 0;
    std::size_t size_ = 0;
    std::size_t head_ = 0;  // oldest slot once full
    std::vector<double> states_, next_states_, actions_, rewards_;
    std::vector<std::uint8_t> terminal_;
};

}  // namespace nsa::rl
