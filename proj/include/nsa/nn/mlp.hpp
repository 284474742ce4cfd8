#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nsa/common.hpp"

namespace nsa::nn {

enum class Activation { relu, tanh, linear };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::linear: return "linear";
    }
    return "linear";
}

inline Activation activation_from_string(std::string_view s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "linear") return Activation::linear;
    throw InvalidInput("unknown activation '" + std::string(s) + "'");
}

/// One fully connected layer; `weight` is out x in.
struct DenseLayer {
    Mat weight;
    Vec bias;
};

/// Per-layer parameter gradients plus the gradient with respect to the input batch.
struct Gradients {
    std::vector<Mat> weight;
    std::vector<Vec> bias;
    Mat input;
};

/// Activations recorded by a batched forward pass, consumed by `Mlp::backward`.
/// `values[0]` is the input batch, `values[l + 1]` the post-activation output of
/// layer l (before output scaling).
struct Tape {
    std::vector<Mat> values;
};

/// Dense feed-forward network. Batches are column-major: one sample per column.
/// The output is `output_scale .* act(W_L h + b_L)`.
class Mlp {
public:
    Mlp() = default;

    Mlp(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output, Vec output_scale)
        : sizes_(std::move(layer_sizes)), hidden_(hidden), output_(output),
          output_scale_(std::move(output_scale)) {
        if (sizes_.size() < 2) throw InvalidInput("an MLP needs at least input and output sizes");
        for (auto s : sizes_) {
            if (s == 0) throw InvalidInput("layer sizes must be positive");
        }
        if (hidden_ == Activation::linear && sizes_.size() > 2) {
            throw InvalidInput("hidden activation must be relu or tanh");
        }
        if (output_ == Activation::relu) throw InvalidInput("output activation must be tanh or linear");
        if (static_cast<std::size_t>(output_scale_.size()) != sizes_.back()) {
            throw InvalidInput("output_scale length must equal the output size");
        }
        layers_.reserve(sizes_.size() - 1);
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            layers_.push_back({Mat::Zero(static_cast<Eigen::Index>(sizes_[l + 1]),
                                         static_cast<Eigen::Index>(sizes_[l])),
                               Vec::Zero(static_cast<Eigen::Index>(sizes_[l + 1]))});
        }
    }

    /// Uniform(+-1/sqrt(fan_in)) initialization. A positive `final_bound` overrides
    /// the bound for the last layer.
    static Mlp random(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output,
                      Vec output_scale, Rng& rng, double final_bound = 0.0) {
        Mlp net(std::move(layer_sizes), hidden, output, std::move(output_scale));
        for (std::size_t l = 0; l < net.layers_.size(); ++l) {
            auto& layer = net.layers_[l];
            double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
            if (l + 1 == net.layers_.size() && final_bound > 0.0) bound = final_bound;
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
                for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = dist(rng);
            }
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = dist(rng);
        }
        return net;
    }

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }
    Activation hidden_activation() const { return hidden_; }
    Activation output_activation() const { return output_; }
    const Vec& output_scale() const { return output_scale_; }

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }

    bool parameters_finite() const {
        for (const auto& l : layers_) {
            if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
        }
        return true;
    }

    bool same_architecture(const Mlp& other) const {
        return sizes_ == other.sizes_ && hidden_ == other.hidden_ && output_ == other.output_;
    }

    Vec forward(const Vec& input) const {
        Mat batch = input;
        return forward(batch).col(0);
    }

    Mat forward(const Mat& batch) const {
        check_input_rows(batch.rows());
        Mat h = batch;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Mat z = layers_[l].weight * h;
            z.colwise() += layers_[l].bias;
            activate(z, activation_of(l));
            h = std::move(z);
        }
        return output_scale_.asDiagonal() * h;
    }

    Mat forward(const Mat& batch, Tape& tape) const {
        check_input_rows(batch.rows());
        tape.values.resize(layers_.size() + 1);
        tape.values[0] = batch;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Mat z = layers_[l].weight * tape.values[l];
            z.colwise() += layers_[l].bias;
            activate(z, activation_of(l));
            tape.values[l + 1] = std::move(z);
        }
        return output_scale_.asDiagonal() * tape.values.back();
    }

    /// Reverse pass. `output_gradient` holds dObjective/dOutput per sample; parameter
    /// gradients are summed over the batch.
    Gradients backward(const Tape& tape, const Mat& output_gradient) const {
        if (tape.values.size() != layers_.size() + 1) throw InvalidInput("tape does not match network");
        const Eigen::Index batch = tape.values[0].cols();
        if (output_gradient.rows() != static_cast<Eigen::Index>(output_size()) ||
            output_gradient.cols() != batch) {
            throw InvalidInput("output gradient shape mismatch");
        }
        Gradients g;
        g.weight.resize(layers_.size());
        g.bias.resize(layers_.size());
        Mat delta = output_scale_.asDiagonal() * output_gradient;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            apply_derivative(delta, tape.values[l + 1], activation_of(l));
            g.weight[l].noalias() = delta * tape.values[l].transpose();
            g.bias[l] = delta.rowwise().sum();
            Mat prev = layers_[l].weight.transpose() * delta;
            delta = std::move(prev);
        }
        g.input = std::move(delta);
        return g;
    }

    Gradients backward(const Vec& input, const Vec& output_gradient) const {
        Tape tape;
        forward(Mat(input), tape);
        return backward(tape, Mat(output_gradient));
    }

private:
    Activation activation_of(std::size_t layer) const {
        return layer + 1 == layers_.size() ? output_ : hidden_;
    }

    void check_input_rows(Eigen::Index rows) const {
        if (rows != static_cast<Eigen::Index>(input_size())) {
            throw InvalidInput("input length " + std::to_string(rows) + " does not match layer size " +
                               std::to_string(input_size()));
        }
    }

    static void activate(Mat& z, Activation a) {
        switch (a) {
            case Activation::relu: z = z.cwiseMax(0.0); break;
            case Activation::tanh: z = z.array().tanh().matrix(); break;
            case Activation::linear: break;
        }
    }

    // Multiplies `delta` by act'(z), expressed through the post-activation value.
    static void apply_derivative(Mat& delta, const Mat& post, Activation a) {
        switch (a) {
            case Activation::relu:
                delta = (post.array() > 0.0).select(delta, 0.0);
                break;
            case Activation::tanh:
                delta.array() *= 1.0 - post.array().square();
                break;
            case Activation::linear: break;
        }
    }

    std::vector<std::size_t> sizes_;
    Activation hidden_ = Activation::relu;
    Activation output_ = Activation::linear;
    Vec output_scale_;
    std::vector<DenseLayer> layers_;
};

}  // namespace nsa::nn
