#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nsa/nn/mlp.hpp"

namespace nsa::nn {

struct OptimizerConfig {
    enum class Kind { adam, sgd };
    Kind kind = Kind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptimizerConfig adam(double lr) { return {Kind::adam, lr, 0.9, 0.999, 1e-8}; }
    static OptimizerConfig sgd(double lr) { return {Kind::sgd, lr, 0.9, 0.999, 1e-8}; }
};

/// Moment accumulators shaped like the parameters of one network.
struct OptimizerState {
    OptimizerConfig config;
    std::uint64_t step_count = 0;
    std::vector<Mat> m_weight, v_weight;
    std::vector<Vec> m_bias, v_bias;

    OptimizerState() = default;

    OptimizerState(const Mlp& net, OptimizerConfig cfg) : config(cfg) {
        if (cfg.learning_rate <= 0.0 || cfg.epsilon <= 0.0 || cfg.beta1 <= 0.0 || cfg.beta2 <= 0.0) {
            throw InvalidInput("optimizer rates must be positive");
        }
        for (const auto& l : net.layers()) {
            m_weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
            v_weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
            m_bias.push_back(Vec::Zero(l.bias.size()));
            v_bias.push_back(Vec::Zero(l.bias.size()));
        }
    }

    bool matches(const Mlp& net) const {
        if (m_weight.size() != net.layers().size()) return false;
        for (std::size_t l = 0; l < m_weight.size(); ++l) {
            const auto& layer = net.layers()[l];
            if (m_weight[l].rows() != layer.weight.rows() || m_weight[l].cols() != layer.weight.cols() ||
                m_bias[l].size() != layer.bias.size()) {
                return false;
            }
        }
        return true;
    }
};

inline bool gradients_finite(const Gradients& g) {
    for (const auto& w : g.weight) {
        if (!w.allFinite()) return false;
    }
    for (const auto& b : g.bias) {
        if (!b.allFinite()) return false;
    }
    return true;
}

/// Descends along `grads` (gradients of a loss to minimize).
inline void apply_gradients(Mlp& net, const Gradients& grads, OptimizerState& opt) {
    if (!opt.matches(net) || grads.weight.size() != net.layers().size() ||
        grads.bias.size() != net.layers().size()) {
        throw InvalidInput("optimizer state or gradients do not match the network");
    }
    for (std::size_t l = 0; l < grads.weight.size(); ++l) {
        const auto& layer = net.layers()[l];
        if (grads.weight[l].rows() != layer.weight.rows() || grads.weight[l].cols() != layer.weight.cols() ||
            grads.bias[l].size() != layer.bias.size()) {
            throw InvalidInput("gradient shape mismatch");
        }
    }
    if (!gradients_finite(grads)) throw TrainingDivergence("non-finite gradient");

    ++opt.step_count;
    const auto& c = opt.config;
    if (c.kind == OptimizerConfig::Kind::sgd) {
        for (std::size_t l = 0; l < grads.weight.size(); ++l) {
            net.layers()[l].weight -= c.learning_rate * grads.weight[l];
            net.layers()[l].bias -= c.learning_rate * grads.bias[l];
        }
    } else {
        const double t = static_cast<double>(opt.step_count);
        const double correction1 = 1.0 - std::pow(c.beta1, t);
        const double correction2 = 1.0 - std::pow(c.beta2, t);
        const double step = c.learning_rate * std::sqrt(correction2) / correction1;
        auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
            m = c.beta1 * m + (1.0 - c.beta1) * g;
            v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
            param.array() -= step * m.array() / (v.array().sqrt() + c.epsilon);
        };
        for (std::size_t l = 0; l < grads.weight.size(); ++l) {
            update(net.layers()[l].weight, opt.m_weight[l], opt.v_weight[l], grads.weight[l]);
            update(net.layers()[l].bias, opt.m_bias[l], opt.v_bias[l], grads.bias[l]);
        }
    }
    if (!net.parameters_finite()) throw TrainingDivergence("non-finite parameters after update");
}

/// target <- (1 - tau) * target + tau * source
inline void soft_update(Mlp& target, const Mlp& source, double tau) {
    if (!target.same_architecture(source)) throw InvalidInput("soft_update: architecture mismatch");
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("soft_update: tau must lie in [0, 1]");
    for (std::size_t l = 0; l < target.layers().size(); ++l) {
        auto& t = target.layers()[l];
        const auto& s = source.layers()[l];
        t.weight = (1.0 - tau) * t.weight + tau * s.weight;
        t.bias = (1.0 - tau) * t.bias + tau * s.bias;
    }
}

}  // namespace nsa::nn
