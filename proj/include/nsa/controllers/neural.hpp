#pragma once

#include <utility>

#include "nsa/common.hpp"
#include "nsa/nn/mlp.hpp"

namespace nsa::controllers {

/// Axis-aligned action bounds.
struct ActionBox {
    Vec low;
    Vec high;

    std::size_t dim() const { return static_cast<std::size_t>(low.size()); }
    Vec center() const { return 0.5 * (low + high); }
    Vec half_width() const { return 0.5 * (high - low); }
    Vec clamp(const Vec& a) const { return a.cwiseMax(low).cwiseMin(high); }
    bool contains(const Vec& a, double tol = 0.0) const {
        return a.size() == low.size() && ((a.array() >= low.array() - tol) && (a.array() <= high.array() + tol)).all();
    }
    /// Maps the box onto [-1, 1]^m.
    Vec normalize(const Vec& a) const { return (a - center()).cwiseQuotient(half_width()); }
};

/// The learned policy pi_theta: features -> action. The actor's tanh output is
/// scaled by the box half-width and shifted to the box center.
class NeuralController {
public:
    NeuralController() = default;

    NeuralController(nn::Mlp actor, ActionBox box) : actor_(std::move(actor)), box_(std::move(box)) {
        if (actor_.output_size() != box_.dim()) throw InvalidInput("actor output does not match the action box");
    }

    /// Actor whose output_scale equals the box half-width, final layer in +-3e-3.
    static NeuralController random(std::size_t input_size, std::vector<std::size_t> hidden, nn::Activation act,
                                   const ActionBox& box, Rng& rng) {
        std::vector<std::size_t> sizes{input_size};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(box.dim());
        return {nn::Mlp::random(sizes, act, nn::Activation::tanh, box.half_width(), rng, 3e-3), box};
    }

    Vec act(const Vec& features) const {
        if (static_cast<std::size_t>(features.size()) != actor_.input_size()) {
            throw InvalidInput("state dimension does not match actor input");
        }
        return box_.clamp(box_.center() + actor_.forward(features));
    }

    nn::Mlp& actor() { return actor_; }
    const nn::Mlp& actor() const { return actor_; }
    const ActionBox& box() const { return box_; }

private:
    nn::Mlp actor_;
    ActionBox box_;
};

}  // namespace nsa::controllers
