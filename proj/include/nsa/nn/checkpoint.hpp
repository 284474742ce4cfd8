#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsa/nn/mlp.hpp"
#include "nsa/nn/optimizer.hpp"

namespace nsa::nn {

inline constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline nlohmann::json row_major(const Mat& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    }
    return flat;
}

inline Mat from_row_major(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols) {
        throw InvalidInput("checkpoint matrix has wrong element count");
    }
    Mat m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = j[k++].get<double>();
    }
    return m;
}

inline nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vec vec_from_json(const nlohmann::json& j, Eigen::Index n) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
        throw InvalidInput("checkpoint vector has wrong length");
    }
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

}  // namespace detail

// nlohmann/json prints doubles with the shortest representation that parses back
// to the same bits, so dump -> parse is exact.
inline nlohmann::json to_json(const Mlp& net) {
    nlohmann::json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["layer_sizes"] = net.layer_sizes();
    j["hidden_activation"] = std::string(to_string(net.hidden_activation()));
    j["output_activation"] = std::string(to_string(net.output_activation()));
    j["output_scale"] = detail::vec_json(net.output_scale());
    auto& layers = j["layers"] = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        layers.push_back({{"weight", detail::row_major(l.weight)}, {"bias", detail::vec_json(l.bias)}});
    }
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
            throw InvalidInput("unsupported checkpoint format version");
        }
        auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        if (sizes.empty()) throw InvalidInput("checkpoint has no layers");
        Mlp net(sizes, activation_from_string(j.at("hidden_activation").get<std::string>()),
                activation_from_string(j.at("output_activation").get<std::string>()),
                detail::vec_from_json(j.at("output_scale"), static_cast<Eigen::Index>(sizes.back())));
        const auto& layers = j.at("layers");
        if (layers.size() != net.layers().size()) throw InvalidInput("checkpoint layer count mismatch");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& layer = net.layers()[l];
            layer.weight = detail::from_row_major(layers[l].at("weight"), layer.weight.rows(), layer.weight.cols());
            layer.bias = detail::vec_from_json(layers[l].at("bias"), layer.bias.size());
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed checkpoint: ") + e.what());
    }
}

inline nlohmann::json to_json(const OptimizerState& opt) {
    nlohmann::json j;
    j["kind"] = opt.config.kind == OptimizerConfig::Kind::adam ? "adam" : "sgd";
    j["learning_rate"] = opt.config.learning_rate;
    j["beta1"] = opt.config.beta1;
    j["beta2"] = opt.config.beta2;
    j["epsilon"] = opt.config.epsilon;
    j["step_count"] = opt.step_count;
    auto& layers = j["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < opt.m_weight.size(); ++l) {
        layers.push_back({{"m_weight", detail::row_major(opt.m_weight[l])},
                          {"v_weight", detail::row_major(opt.v_weight[l])},
                          {"m_bias", detail::vec_json(opt.m_bias[l])},
                          {"v_bias", detail::vec_json(opt.v_bias[l])}});
    }
    return j;
}

/// Restores optimizer moments for `net`; shapes are validated against it.
inline OptimizerState optimizer_from_json(const nlohmann::json& j, const Mlp& net) {
    try {
        OptimizerConfig cfg;
        cfg.kind = j.at("kind").get<std::string>() == "sgd" ? OptimizerConfig::Kind::sgd
                                                           : OptimizerConfig::Kind::adam;
        cfg.learning_rate = j.at("learning_rate").get<double>();
        cfg.beta1 = j.at("beta1").get<double>();
        cfg.beta2 = j.at("beta2").get<double>();
        cfg.epsilon = j.at("epsilon").get<double>();
        OptimizerState opt(net, cfg);
        opt.step_count = j.at("step_count").get<std::uint64_t>();
        const auto& layers = j.at("layers");
        if (layers.size() != opt.m_weight.size()) throw InvalidInput("optimizer layer count mismatch");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto r = opt.m_weight[l].rows();
            const auto c = opt.m_weight[l].cols();
            opt.m_weight[l] = detail::from_row_major(layers[l].at("m_weight"), r, c);
            opt.v_weight[l] = detail::from_row_major(layers[l].at("v_weight"), r, c);
            opt.m_bias[l] = detail::vec_from_json(layers[l].at("m_bias"), opt.m_bias[l].size());
            opt.v_bias[l] = detail::vec_from_json(layers[l].at("v_bias"), opt.v_bias[l].size());
        }
        return opt;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed optimizer state: ") + e.what());
    }
}

inline void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write checkpoint " + path);
    out << to_json(net).dump() << '\n';
}

inline Mlp load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read checkpoint " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed checkpoint: ") + e.what());
    }
    return mlp_from_json(j);
}

}  // namespace nsa::nn
