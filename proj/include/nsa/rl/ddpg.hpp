#pragma once

#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "nsa/controllers/neural.hpp"
#include "nsa/nn/mlp.hpp"
#include "nsa/nn/optimizer.hpp"
#include "nsa/rl/replay_buffer.hpp"

namespace nsa::rl {

struct DdpgConfig {
    double gamma = 0.99;
    double tau = 0.005;
    std::size_t batch_size = 64;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    /// Rewards are multiplied by this before entering the critic target.
    double reward_scale = 1.0;
    std::vector<std::size_t> actor_hidden{32, 32};
    nn::Activation actor_activation = nn::Activation::relu;
    std::vector<std::size_t> critic_hidden{64, 64};
};

struct UpdateStats {
    double critic_loss = 0.0;
    double mean_q = 0.0;
};

/// Actor-critic pair with target copies. The critic sees [features; a_norm] where
/// a_norm maps the action box onto [-1, 1]^m.
class DdpgAgent {
public:
    DdpgAgent() = default;

    DdpgAgent(controllers::NeuralController policy, nn::Mlp critic, DdpgConfig cfg)
        : cfg_(std::move(cfg)), policy_(std::move(policy)), critic_(std::move(critic)) {
        if (critic_.input_size() != policy_.actor().input_size() + policy_.box().dim() || critic_.output_size() != 1) {
            throw InvalidInput("critic must take [state; action] and return a scalar");
        }
        if (!(cfg_.gamma >= 0.0 && cfg_.gamma <= 1.0)) throw InvalidInput("gamma must lie in [0, 1]");
        actor_target_ = policy_.actor();
        critic_target_ = critic_;
        actor_opt_ = nn::OptimizerState(policy_.actor(), nn::OptimizerConfig::adam(cfg_.actor_lr));
        critic_opt_ = nn::OptimizerState(critic_, nn::OptimizerConfig::adam(cfg_.critic_lr));
    }

    static DdpgAgent create(std::size_t feature_dim, const controllers::ActionBox& box, DdpgConfig cfg, Rng& rng) {
        auto policy = controllers::NeuralController::random(feature_dim, cfg.actor_hidden, cfg.actor_activation, box, rng);
        std::vector<std::size_t> sizes{feature_dim + box.dim()};
        sizes.insert(sizes.end(), cfg.critic_hidden.begin(), cfg.critic_hidden.end());
        sizes.push_back(1);
        auto critic = nn::Mlp::random(sizes, nn::Activation::relu, nn::Activation::linear, Vec::Ones(1), rng);
        return DdpgAgent(std::move(policy), std::move(critic), std::move(cfg));
    }

    const DdpgConfig& config() const { return cfg_; }
    DdpgConfig& config() { return cfg_; }
    controllers::NeuralController& policy() { return policy_; }
    const controllers::NeuralController& policy() const { return policy_; }
    const nn::Mlp& critic() const { return critic_; }
    nn::Mlp& critic() { return critic_; }
    const nn::Mlp& actor_target() const { return actor_target_; }
    nn::Mlp& actor_target() { return actor_target_; }
    const nn::Mlp& critic_target() const { return critic_target_; }
    nn::Mlp& critic_target() { return critic_target_; }
    nn::OptimizerState& actor_optimizer() { return actor_opt_; }
    const nn::OptimizerState& actor_optimizer() const { return actor_opt_; }
    nn::OptimizerState& critic_optimizer() { return critic_opt_; }
    const nn::OptimizerState& critic_optimizer() const { return critic_opt_; }
    std::size_t update_count() const { return updates_; }
    void set_update_count(std::size_t n) { updates_ = n; }

    /// Critic estimate in reward-scaled units.
    double q_value(const Vec& features, const Vec& action) const {
        Vec in(features.size() + action.size());
        in << features, policy_.box().normalize(action);
        return critic_.forward(in)(0);
    }

    /// y = scale * r + gamma * (1 - terminal) * Q'(s', pi'(s'))
    Vec critic_targets(const Batch& b) const {
        const Mat next_actions = normalized_actor_output(actor_target_, b.next_states);
        const Mat next_q = critic_target_.forward(stack(b.next_states, next_actions));
        return cfg_.reward_scale * b.rewards +
               cfg_.gamma * (Vec::Ones(b.size()) - b.terminal).cwiseProduct(next_q.row(0).transpose());
    }

    /// One DDPG step: critic regression toward the bootstrapped targets, actor ascent
    /// along dQ/da * da/dtheta, then soft target tracking.
    UpdateStats update(const Batch& b) {
        const Eigen::Index k = b.size();
        if (k == 0) throw InvalidInput("ddpg update needs a nonempty batch");
        const double inv_k = 1.0 / static_cast<double>(k);
        const Vec y = critic_targets(b);

        Mat norm_actions(b.actions.rows(), k);
        const Vec center = policy_.box().center();
        const Vec half = policy_.box().half_width();
        for (Eigen::Index c = 0; c < k; ++c) norm_actions.col(c) = (b.actions.col(c) - center).cwiseQuotient(half);

        nn::Tape critic_tape;
        const Mat q = critic_.forward(stack(b.states, norm_actions), critic_tape);
        const Vec err = q.row(0).transpose() - y;
        UpdateStats stats;
        stats.critic_loss = err.squaredNorm() * inv_k;
        stats.mean_q = q.mean();
        if (!std::isfinite(stats.critic_loss)) throw divergence(b, y, q);
        const nn::Gradients critic_grads = critic_.backward(critic_tape, (2.0 * inv_k) * err.transpose());
        nn::apply_gradients(critic_, critic_grads, critic_opt_);

        nn::Tape actor_tape;
        const Mat raw = policy_.actor().forward(b.states, actor_tape);
        const Mat a_norm = half.cwiseInverse().asDiagonal() * raw;
        nn::Tape q_tape;
        critic_.forward(stack(b.states, a_norm), q_tape);
        const nn::Gradients dq = critic_.backward(q_tape, Mat::Constant(1, k, -inv_k));
        const Mat d_action = half.cwiseInverse().asDiagonal() * dq.input.bottomRows(a_norm.rows());
        const nn::Gradients actor_grads = policy_.actor().backward(actor_tape, d_action);
        nn::apply_gradients(policy_.actor(), actor_grads, actor_opt_);

        nn::soft_update(critic_target_, critic_, cfg_.tau);
        nn::soft_update(actor_target_, policy_.actor(), cfg_.tau);
        ++updates_;
        return stats;
    }

private:
    static Mat stack(const Mat& top, const Mat& bottom) {
        Mat out(top.rows() + bottom.rows(), top.cols());
        out << top, bottom;
        return out;
    }

    Mat normalized_actor_output(const nn::Mlp& actor, const Mat& states) const {
        return policy_.box().half_width().cwiseInverse().asDiagonal() * actor.forward(states);
    }

    TrainingDivergence divergence(const Batch& b, const Vec& y, const Mat& q) const {
        std::ostringstream msg;
        msg << "critic loss is not finite after " << updates_ << " updates; batch of " << b.size()
            << ", max |r| = " << b.rewards.cwiseAbs().maxCoeff() << ", max |y| = " << y.cwiseAbs().maxCoeff()
            << ", max |Q| = " << q.cwiseAbs().maxCoeff() << ", actor finite = " << policy_.actor().parameters_finite()
            << ", critic finite = " << critic_.parameters_finite();
        return TrainingDivergence(msg.str());
    }

    DdpgConfig cfg_;
    controllers::NeuralController policy_;
    nn::Mlp critic_;
    nn::Mlp actor_target_;
    nn::Mlp critic_target_;
    nn::OptimizerState actor_opt_;
    nn::OptimizerState critic_opt_;
    std::size_t updates_ = 0;
};

}  // namespace nsa::rl
